#include "tier/call_ir.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace tier {

// ---------------------------------------------------------------------------
// ArgValue

ArgValue ArgValue::from_string(std::string s) {
    ArgValue v;
    v.v_ = std::move(s);
    return v;
}
ArgValue ArgValue::from_integer(std::int64_t x) {
    ArgValue v;
    v.v_ = x;
    return v;
}
ArgValue ArgValue::from_float(double x) {
    ArgValue v;
    v.v_ = x;
    return v;
}
ArgValue ArgValue::from_boolean(bool x) {
    ArgValue v;
    v.v_ = x;
    return v;
}
ArgValue ArgValue::from_object(Object fields) {
    ArgValue v;
    v.v_ = std::move(fields);
    return v;
}
ArgValue ArgValue::from_array(Array items) {
    ArgValue v;
    v.v_ = std::move(items);
    return v;
}
ArgValue ArgValue::from_ref(int target_id) {
    ArgValue v;
    v.v_ = ResponseRef{target_id};
    return v;
}

bool ArgValue::is_scalar() const {
    return scalar_kind().has_value();
}

std::optional<ScalarKind> ArgValue::scalar_kind() const {
    if (std::holds_alternative<std::string>(v_)) return ScalarKind::String;
    if (std::holds_alternative<std::int64_t>(v_)) return ScalarKind::Integer;
    if (std::holds_alternative<double>(v_)) return ScalarKind::Float;
    if (std::holds_alternative<bool>(v_)) return ScalarKind::Boolean;
    return std::nullopt;
}

std::optional<int> match_response_placeholder(const std::string& s) {
    static const std::string prefix = "API_RESPONSE_";
    if (s.size() <= prefix.size() || s.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
    const std::string digits = s.substr(prefix.size());
    if (digits.size() > 9) return std::nullopt; // not a representable call index
    for (char c : digits)
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    return std::stoi(digits);
}

Json ArgValue::to_json() const {
    if (is_ref()) return Json("API_RESPONSE_" + std::to_string(ref_target()));
    if (auto k = scalar_kind()) {
        switch (*k) {
            case ScalarKind::String: return Json(as_string());
            case ScalarKind::Integer: return Json(as_integer());
            case ScalarKind::Float: return Json(as_float());
            case ScalarKind::Boolean: return Json(as_boolean());
        }
    }
    if (is_object()) {
        Json o = Json::object();
        for (const auto& [k, v] : as_object()) o[k] = v.to_json();
        return o;
    }
    Json a = Json::array();
    for (const auto& v : as_array()) a.push_back(v.to_json());
    return a;
}

ArgValue ArgValue::from_json(const Json& j) {
    switch (j.type()) {
        case Json::value_t::string: {
            const auto& s = j.get_ref<const std::string&>();
            if (auto id = match_response_placeholder(s)) return from_ref(*id);
            return from_string(s);
        }
        case Json::value_t::number_integer:
            return from_integer(j.get<std::int64_t>());
        case Json::value_t::number_unsigned: {
            auto u = j.get<std::uint64_t>();
            if (u <= static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
                return from_integer(static_cast<std::int64_t>(u));
            return from_float(static_cast<double>(u));
        }
        case Json::value_t::number_float:
            return from_float(j.get<double>());
        case Json::value_t::boolean:
            return from_boolean(j.get<bool>());
        case Json::value_t::object: {
            Object fields;
            for (auto it = j.begin(); it != j.end(); ++it)
                fields.emplace_back(it.key(), from_json(it.value()));
            return from_object(std::move(fields));
        }
        case Json::value_t::array: {
            Array items;
            for (const auto& e : j) items.push_back(from_json(e));
            return from_array(std::move(items));
        }
        default:
            throw Error("UnsupportedValue", "null is not a valid argument value");
    }
}

void ArgValue::collect_refs(std::vector<int>& out) const {
    if (is_ref()) {
        out.push_back(ref_target());
    } else if (is_object()) {
        for (const auto& [_, v] : as_object()) v.collect_refs(out);
    } else if (is_array()) {
        for (const auto& v : as_array()) v.collect_refs(out);
    }
}

namespace {

bool keyed_fields_equal(const ArgValue::Object& a, const ArgValue::Object& b) {
    if (a.size() != b.size()) return false;
    for (const auto& field : a) {
        auto it = std::find_if(b.begin(), b.end(),
                               [&](const auto& kv) { return kv.first == field.first; });
        if (it == b.end() || !(it->second == field.second)) return false;
    }
    return true;
}

} // namespace

bool operator==(const ArgValue& a, const ArgValue& b) {
    if (a.v_.index() != b.v_.index()) return false;
    if (a.is_ref()) return a.ref_target() == b.ref_target();
    if (a.is_object()) return keyed_fields_equal(a.as_object(), b.as_object());
    if (a.is_array()) {
        const auto& xs = a.as_array();
        const auto& ys = b.as_array();
        if (xs.size() != ys.size()) return false;
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (!(xs[i] == ys[i])) return false;
        return true;
    }
    switch (*a.scalar_kind()) {
        case ScalarKind::String: return a.as_string() == b.as_string();
        case ScalarKind::Integer: return a.as_integer() == b.as_integer();
        case ScalarKind::Float: return a.as_float() == b.as_float();
        case ScalarKind::Boolean: return a.as_boolean() == b.as_boolean();
    }
    return false;
}

const ArgValue* ToolCall::find_arg(const std::string& name) const {
    for (const auto& [n, v] : args)
        if (n == name) return &v;
    return nullptr;
}

bool operator==(const ToolCall& a, const ToolCall& b) {
    return a.id == b.id && a.tool_name == b.tool_name && keyed_fields_equal(a.args, b.args);
}

bool operator==(const ToolCallSequence& a, const ToolCallSequence& b) {
    return a.calls == b.calls && a.return_mode == b.return_mode && a.is_no_call == b.is_no_call;
}

// ---------------------------------------------------------------------------
// Wrapper extraction

namespace {

std::string strip_think_blocks(const std::string& text) {
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t open = text.find("<think>", pos);
        if (open == std::string::npos) {
            out.append(text, pos, text.size() - pos);
            break;
        }
        out.append(text, pos, open - pos);
        std::size_t close = text.find("</think>", open);
        if (close == std::string::npos) break; // unterminated: discard to end
        pos = close + 8;
    }
    return out;
}

} // namespace

ExtractOutcome extract_tool_call_block(const std::string& model_response) {
    const std::string text = strip_think_blocks(model_response);
    const std::string open_tag = "<tool_call";

    // the tag name must end at the attribute list or '>'
    auto find_tag = [&](std::size_t from) {
        std::size_t at = text.find(open_tag, from);
        while (at != std::string::npos) {
            const std::size_t after = at + open_tag.size();
            if (after >= text.size() || text[after] == '>' ||
                std::isspace(static_cast<unsigned char>(text[after])))
                return at;
            at = text.find(open_tag, at + 1);
        }
        return std::string::npos;
    };

    std::size_t first = find_tag(0);
    if (first == std::string::npos)
        return FormatError{"MissingToolCallBlock", "no <tool_call> block in response", {}};
    if (find_tag(first + open_tag.size()) != std::string::npos)
        return FormatError{"MultipleToolCallBlocks", "more than one <tool_call> block", {}};

    std::size_t p = first + open_tag.size();
    auto skip_ws = [&] {
        while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p]))) ++p;
    };
    skip_ws();
    if (p >= text.size() || text.compare(p, 6, "return") != 0)
        return FormatError{"BadReturnAttribute", "missing return attribute on <tool_call>", std::make_pair(first, p - first)};
    p += 6;
    skip_ws();
    if (p >= text.size() || text[p] != '=')
        return FormatError{"BadReturnAttribute", "malformed return attribute", std::make_pair(first, p - first)};
    ++p;
    skip_ws();
    if (p >= text.size() || text[p] != '"')
        return FormatError{"BadReturnAttribute", "return attribute value must be quoted", std::make_pair(first, p - first)};
    ++p;
    std::size_t value_end = text.find('"', p);
    if (value_end == std::string::npos)
        return FormatError{"BadReturnAttribute", "unterminated return attribute", std::make_pair(first, p - first)};
    const std::string value = text.substr(p, value_end - p);
    p = value_end + 1;
    skip_ws();
    if (p >= text.size() || text[p] != '>')
        return FormatError{"BadReturnAttribute", "unexpected content in <tool_call> tag", std::make_pair(first, p - first)};
    ++p;

    ReturnMode mode;
    if (value == "one") {
        mode = ReturnMode::One;
    } else if (value == "all") {
        mode = ReturnMode::All;
    } else {
        return FormatError{"BadReturnAttribute", "return attribute must be \"one\" or \"all\", got \"" + value + "\"", {}};
    }

    std::size_t close = text.find("</tool_call>", p);
    if (close == std::string::npos)
        return FormatError{"UnclosedTag", "<tool_call> block is never closed", std::make_pair(first, std::size_t{0})};
    return ExtractedBlock{text.substr(p, close - p), mode};
}

// ---------------------------------------------------------------------------
// Shared structural checks

namespace {

// Sorts by id, then enforces the canonical shape: distinct contiguous
// zero-based ids, distinct argument names per call, backward-only refs.
std::optional<FormatError> finalize_calls(std::vector<ToolCall>& calls) {
    std::sort(calls.begin(), calls.end(),
              [](const ToolCall& a, const ToolCall& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < calls.size(); ++i) {
        if (i > 0 && calls[i].id == calls[i - 1].id)
            return FormatError{"DuplicateId", "call id " + std::to_string(calls[i].id) + " appears twice", {}};
        if (calls[i].id != static_cast<int>(i))
            return FormatError{"NonContiguousIds",
                               "call ids must be exactly 0.." + std::to_string(calls.size() - 1), {}};
    }
    for (const auto& call : calls) {
        std::set<std::string> names;
        for (const auto& [name, _] : call.args)
            if (!names.insert(name).second)
                return FormatError{"DuplicateKey",
                                   "argument '" + name + "' appears twice in call " + std::to_string(call.id), {}};
        std::vector<int> refs;
        for (const auto& [_, v] : call.args) v.collect_refs(refs);
        for (int target : refs)
            if (target >= call.id)
                return FormatError{"ForwardReference",
                                   "call " + std::to_string(call.id) + " references API_RESPONSE_" +
                                       std::to_string(target) + "; only earlier calls may be referenced", {}};
    }
    return std::nullopt;
}

bool is_canonical_index(const std::string& s) {
    if (s.empty() || s.size() > 9) return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return s.size() == 1 || s[0] != '0';
}

} // namespace

// ---------------------------------------------------------------------------
// JSON AST

namespace {

// DOM-building SAX handler that rejects duplicate object keys, nulls, and
// runaway nesting, none of which nlohmann's stock parser reports.
class StrictJsonSax : public nlohmann::json_sax<Json> {
public:
    static constexpr std::size_t kMaxDepth = 256;

    Json root;
    bool saw_null = false;
    bool saw_dup = false;
    bool dup_at_top = false;
    bool too_deep = false;
    std::string dup_key;
    std::string syntax_error;
    std::size_t error_pos = 0;

    bool null() override {
        saw_null = true;
        return false;
    }
    bool boolean(bool v) override { return emit(Json(v)); }
    bool number_integer(number_integer_t v) override { return emit(Json(v)); }
    bool number_unsigned(number_unsigned_t v) override { return emit(Json(v)); }
    bool number_float(number_float_t v, const string_t&) override { return emit(Json(v)); }
    bool string(string_t& v) override { return emit(Json(std::move(v))); }
    bool binary(binary_t&) override { return false; }

    bool start_object(std::size_t) override {
        if (stack_.size() >= kMaxDepth) {
            too_deep = true;
            return false;
        }
        stack_.push_back(Frame{Json::object(), {}, {}});
        return true;
    }
    bool key(string_t& k) override {
        Frame& f = stack_.back();
        if (!f.keys.insert(k).second) {
            saw_dup = true;
            dup_at_top = stack_.size() == 1;
            dup_key = k;
            return false;
        }
        f.pending_key = std::move(k);
        return true;
    }
    bool end_object() override { return pop(); }
    bool start_array(std::size_t) override {
        if (stack_.size() >= kMaxDepth) {
            too_deep = true;
            return false;
        }
        stack_.push_back(Frame{Json::array(), {}, {}});
        return true;
    }
    bool end_array() override { return pop(); }

    bool parse_error(std::size_t position, const std::string&,
                     const nlohmann::detail::exception& ex) override {
        syntax_error = ex.what();
        error_pos = position;
        return false;
    }

private:
    struct Frame {
        Json value;
        std::set<std::string> keys;
        std::string pending_key;
    };
    std::vector<Frame> stack_;

    bool emit(Json v) {
        if (stack_.empty()) {
            root = std::move(v);
            return true;
        }
        Frame& f = stack_.back();
        if (f.value.is_object())
            f.value[f.pending_key] = std::move(v);
        else
            f.value.push_back(std::move(v));
        return true;
    }
    bool pop() {
        Json done = std::move(stack_.back().value);
        stack_.pop_back();
        return emit(std::move(done));
    }
};

} // namespace

ParseOutcome parse_json_ast(const std::string& payload, ReturnMode mode) {
    StrictJsonSax sax;
    bool ok = Json::sax_parse(payload, &sax);
    if (!ok) {
        if (sax.saw_dup)
            return ParseOutcome::failure(sax.dup_at_top ? "DuplicateId" : "DuplicateKey",
                                         "duplicate key '" + sax.dup_key + "'");
        if (sax.saw_null)
            return ParseOutcome::failure("UnsupportedValue", "null is not a valid argument value");
        if (sax.too_deep)
            return ParseOutcome::failure("Syntax", "nesting exceeds " +
                                                       std::to_string(StrictJsonSax::kMaxDepth) +
                                                       " levels");
        return ParseOutcome::failure("Syntax", sax.syntax_error,
                                     std::make_pair(sax.error_pos, std::size_t{0}));
    }
    const Json& doc = sax.root;
    if (!doc.is_object())
        return ParseOutcome::failure("NotAnObject", "a JSON AST payload must be an object");

    ToolCallSequence seq;
    seq.return_mode = mode;
    if (doc.empty()) {
        seq.is_no_call = true;
        return ParseOutcome::success(std::move(seq));
    }

    std::vector<ToolCall> calls;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (!is_canonical_index(it.key()))
            return ParseOutcome::failure("BadCallId",
                                         "call id '" + it.key() + "' is not a canonical zero-based index");
        ToolCall call;
        call.id = std::stoi(it.key());
        const Json& body = it.value();
        if (!body.is_object())
            return ParseOutcome::failure("Syntax", "call " + it.key() + " must map to an object");
        if (body.size() != 1)
            return ParseOutcome::failure("MultipleToolNames",
                                         "call " + it.key() + " must contain exactly one tool name");
        auto inner = body.begin();
        call.tool_name = inner.key();
        if (call.tool_name.empty())
            return ParseOutcome::failure("Syntax", "empty tool name in call " + it.key());
        if (!inner.value().is_object())
            return ParseOutcome::failure("Syntax",
                                         "arguments of '" + call.tool_name + "' must be an object");
        try {
            for (auto arg = inner.value().begin(); arg != inner.value().end(); ++arg) {
                if (arg.key().empty())
                    return ParseOutcome::failure("Syntax", "empty argument name in call " + it.key());
                call.args.emplace_back(arg.key(), ArgValue::from_json(arg.value()));
            }
        } catch (const Error& e) {
            return ParseOutcome::failure(e.code(), e.what());
        }
        calls.push_back(std::move(call));
    }
    if (auto err = finalize_calls(calls)) return ParseOutcome::failure(*err);
    seq.calls = std::move(calls);
    return ParseOutcome::success(std::move(seq));
}

// ---------------------------------------------------------------------------
// XML AST

namespace {

std::optional<std::string> decode_entities(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size();) {
        if (raw[i] != '&') {
            out.push_back(raw[i++]);
            continue;
        }
        std::size_t semi = raw.find(';', i);
        if (semi == std::string::npos) return std::nullopt;
        const std::string name = raw.substr(i + 1, semi - i - 1);
        if (name == "amp") out.push_back('&');
        else if (name == "lt") out.push_back('<');
        else if (name == "gt") out.push_back('>');
        else if (name == "quot") out.push_back('"');
        else if (name == "apos") out.push_back('\'');
        else return std::nullopt;
        i = semi + 1;
    }
    return out;
}

std::string encode_entities(const std::string& raw, bool in_attribute) {
    std::string out;
    out.reserve(raw.size());
    for (char c : raw) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"':
                if (in_attribute) out += "&quot;";
                else out.push_back(c);
                break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string trimmed(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool lex_integer(const std::string& s, std::int64_t& out) {
    if (s.empty()) return false;
    std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) return false;
    for (std::size_t k = i; k < s.size(); ++k)
        if (!std::isdigit(static_cast<unsigned char>(s[k]))) return false;
    auto [ptr, ec] = std::from_chars(s.data() + (s[0] == '+' ? 1 : 0), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

bool lex_float(const std::string& s, double& out) {
    if (s.empty()) return false;
    bool has_dot = false, has_exp = false;
    for (char c : s) {
        if (c == '.') has_dot = true;
        if (c == 'e' || c == 'E') has_exp = true;
    }
    if (!has_dot && !has_exp) return false;
    std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size() || (!std::isdigit(static_cast<unsigned char>(s[i])) && s[i] != '.')) return false;
    try {
        std::size_t consumed = 0;
        out = std::stod(s, &consumed);
        return consumed == s.size();
    } catch (...) {
        return false;
    }
}

// Scalar from raw XML character data: numeric and boolean literals win
// (whitespace-tolerant); anything else is verbatim string content.
ArgValue scalar_from_text(const std::string& raw) {
    const std::string t = trimmed(raw);
    std::int64_t i;
    double d;
    if (lex_integer(t, i)) return ArgValue::from_integer(i);
    if (lex_float(t, d)) return ArgValue::from_float(d);
    if (t == "true") return ArgValue::from_boolean(true);
    if (t == "false") return ArgValue::from_boolean(false);
    if (auto id = match_response_placeholder(t)) return ArgValue::from_ref(*id);
    return ArgValue::from_string(raw);
}

class XmlScanner {
public:
    explicit XmlScanner(const std::string& text) : s_(text) {}

    std::size_t pos() const { return pos_; }
    bool at_end() const { return pos_ >= s_.size(); }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool accept(const std::string& lit) {
        if (s_.compare(pos_, lit.size(), lit) == 0) {
            pos_ += lit.size();
            return true;
        }
        return false;
    }
    bool peek(const std::string& lit) const { return s_.compare(pos_, lit.size(), lit) == 0; }

    // Reads `name="value"` attribute pairs up to '>' or '/>'.
    std::optional<std::map<std::string, std::string>> read_attributes(bool& self_closing) {
        std::map<std::string, std::string> attrs;
        self_closing = false;
        while (true) {
            skip_ws();
            if (at_end()) return std::nullopt;
            if (accept("/>")) {
                self_closing = true;
                return attrs;
            }
            if (accept(">")) return attrs;
            std::string name;
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
                name.push_back(s_[pos_++]);
            if (name.empty()) return std::nullopt;
            skip_ws();
            if (!accept("=")) return std::nullopt;
            skip_ws();
            if (at_end() || (s_[pos_] != '"' && s_[pos_] != '\'')) return std::nullopt;
            const char quote = s_[pos_++];
            std::size_t end = s_.find(quote, pos_);
            if (end == std::string::npos) return std::nullopt;
            auto decoded = decode_entities(s_.substr(pos_, end - pos_));
            if (!decoded) return std::nullopt;
            if (attrs.count(name)) return std::nullopt;
            attrs[name] = *decoded;
            pos_ = end + 1;
        }
    }

    // Raw character data up to the given closing tag (no '<' allowed inside).
    std::optional<std::string> read_text_until(const std::string& close_tag) {
        std::size_t lt = s_.find('<', pos_);
        if (lt == std::string::npos) return std::nullopt;
        std::string raw = s_.substr(pos_, lt - pos_);
        pos_ = lt;
        if (!accept(close_tag)) return std::nullopt;
        return raw;
    }

private:
    const std::string& s_;
    std::size_t pos_ = 0;
};

} // namespace

ParseOutcome parse_xml_ast(const std::string& payload, ReturnMode mode) {
    XmlScanner sc(payload);
    sc.skip_ws();

    ToolCallSequence seq;
    seq.return_mode = mode;
    if (sc.at_end()) { // the XML empty form
        seq.is_no_call = true;
        return ParseOutcome::success(std::move(seq));
    }

    std::vector<ToolCall> calls;
    while (!sc.at_end()) {
        const std::size_t api_start = sc.pos();
        if (!sc.accept("<api"))
            return ParseOutcome::failure("Syntax", "expected <api> element",
                                         std::make_pair(sc.pos(), std::size_t{0}));
        bool self_closing = false;
        auto attrs = sc.read_attributes(self_closing);
        if (!attrs || self_closing)
            return ParseOutcome::failure("Syntax", "malformed <api> tag",
                                         std::make_pair(api_start, std::size_t{0}));
        auto id_it = attrs->find("id");
        if (id_it == attrs->end() || !is_canonical_index(id_it->second))
            return ParseOutcome::failure("BadCallId", "missing or non-canonical id on <api>",
                                         std::make_pair(api_start, std::size_t{0}));
        ToolCall call;
        call.id = std::stoi(id_it->second);

        sc.skip_ws();
        if (!sc.accept("<name>"))
            return ParseOutcome::failure("MissingName",
                                         "<api id=\"" + id_it->second + "\"> lacks a <name> element");
        auto name_text = sc.read_text_until("</name>");
        if (!name_text)
            return ParseOutcome::failure("Syntax", "unterminated <name> element");
        auto decoded_name = decode_entities(*name_text);
        if (!decoded_name) return ParseOutcome::failure("Syntax", "bad entity in <name>");
        call.tool_name = trimmed(*decoded_name);
        if (call.tool_name.empty())
            return ParseOutcome::failure("MissingName", "empty tool name in <api>");

        while (true) {
            sc.skip_ws();
            if (sc.accept("</api>")) break;
            if (!sc.accept("<param"))
                return ParseOutcome::failure("Syntax", "expected <param> or </api>",
                                             std::make_pair(sc.pos(), std::size_t{0}));
            bool param_self_closing = false;
            auto pattrs = sc.read_attributes(param_self_closing);
            if (!pattrs || param_self_closing)
                return ParseOutcome::failure("Syntax", "malformed <param> tag");
            auto pname = pattrs->find("name");
            if (pname == pattrs->end() || pname->second.empty())
                return ParseOutcome::failure("Syntax", "<param> without a name attribute");
            // A declared type attribute is a hint only; the canonical scalar
            // comes from the lexical form and the verifier owns dtype checks.

            sc.skip_ws();
            ArgValue value = ArgValue::from_boolean(false);
            if (sc.peek("<response")) {
                sc.accept("<response");
                bool resp_self_closing = false;
                auto rattrs = sc.read_attributes(resp_self_closing);
                if (!rattrs)
                    return ParseOutcome::failure("Syntax", "malformed <response> element");
                auto target = rattrs->find("api_id");
                if (target == rattrs->end() || !is_canonical_index(target->second))
                    return ParseOutcome::failure("Syntax", "<response> without a valid api_id");
                value = ArgValue::from_ref(std::stoi(target->second));
                if (!resp_self_closing) {
                    sc.skip_ws();
                    if (!sc.accept("</response>"))
                        return ParseOutcome::failure("Syntax", "unterminated <response> element");
                }
                sc.skip_ws();
                if (!sc.accept("</param>"))
                    return ParseOutcome::failure("Syntax", "unterminated <param> element");
            } else {
                auto body = sc.read_text_until("</param>");
                if (!body)
                    return ParseOutcome::failure("Syntax", "unterminated <param> element");
                auto decoded = decode_entities(*body);
                if (!decoded) return ParseOutcome::failure("Syntax", "bad entity in <param>");
                value = scalar_from_text(*decoded);
            }
            call.args.emplace_back(pname->second, std::move(value));
        }
        calls.push_back(std::move(call));
        sc.skip_ws();
    }

    if (auto err = finalize_calls(calls)) return ParseOutcome::failure(*err);
    seq.calls = std::move(calls);
    return ParseOutcome::success(std::move(seq));
}

// ---------------------------------------------------------------------------
// Direct call list

namespace {

struct DirectLexer {
    explicit DirectLexer(const std::string& text) : s(text) {}

    const std::string& s;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool at_end() {
        skip_ws();
        return pos >= s.size();
    }
    bool accept(char c) {
        skip_ws();
        if (pos < s.size() && s[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }
    char peek() {
        skip_ws();
        return pos < s.size() ? s[pos] : '\0';
    }

    // Identifiers cover tool names (dots allowed, e.g. vendor.tool) and
    // keyword-argument names.
    std::optional<std::string> read_identifier() {
        skip_ws();
        std::size_t start = pos;
        if (pos >= s.size()) return std::nullopt;
        if (!std::isalpha(static_cast<unsigned char>(s[pos])) && s[pos] != '_') return std::nullopt;
        while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) ||
                                  s[pos] == '_' || s[pos] == '.'))
            ++pos;
        return s.substr(start, pos - start);
    }

    std::optional<std::string> read_quoted_string() {
        const char quote = s[pos++];
        std::string out;
        while (pos < s.size()) {
            char c = s[pos++];
            if (c == quote) return out;
            if (c != '\\') {
                out.push_back(c);
                continue;
            }
            if (pos >= s.size()) return std::nullopt;
            char e = s[pos++];
            switch (e) {
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'r': out.push_back('\r'); break;
                case '\\': out.push_back('\\'); break;
                case '/': out.push_back('/'); break;
                case '"': out.push_back('"'); break;
                case '\'': out.push_back('\''); break;
                case 'u': {
                    if (pos + 4 > s.size()) return std::nullopt;
                    unsigned cp = 0;
                    for (int k = 0; k < 4; ++k) {
                        char h = s[pos++];
                        cp <<= 4;
                        if (h >= '0' && h <= '9') cp |= static_cast<unsigned>(h - '0');
                        else if (h >= 'a' && h <= 'f') cp |= static_cast<unsigned>(h - 'a' + 10);
                        else if (h >= 'A' && h <= 'F') cp |= static_cast<unsigned>(h - 'A' + 10);
                        else return std::nullopt;
                    }
                    // BMP code points only; surrogate pairs are not expected
                    // in corpus payloads.
                    if (cp < 0x80) {
                        out.push_back(static_cast<char>(cp));
                    } else if (cp < 0x800) {
                        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
                        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
                    } else {
                        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
                        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
                        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
                    }
                    break;
                }
                default: return std::nullopt;
            }
        }
        return std::nullopt;
    }

    std::optional<ArgValue> read_number() {
        std::size_t start = pos;
        if (s[pos] == '+' || s[pos] == '-') ++pos;
        bool is_float = false;
        while (pos < s.size() &&
               (std::isdigit(static_cast<unsigned char>(s[pos])) || s[pos] == '.' ||
                s[pos] == 'e' || s[pos] == 'E' ||
                ((s[pos] == '+' || s[pos] == '-') && (s[pos - 1] == 'e' || s[pos - 1] == 'E')))) {
            if (s[pos] == '.' || s[pos] == 'e' || s[pos] == 'E') is_float = true;
            ++pos;
        }
        const std::string tok = s.substr(start, pos - start);
        if (!is_float) {
            std::int64_t v;
            if (lex_integer(tok, v)) return ArgValue::from_integer(v);
        }
        double d;
        if (lex_float(tok, d)) return ArgValue::from_float(d);
        return std::nullopt;
    }
};

} // namespace

ParseOutcome parse_direct_list(const std::string& payload, ReturnMode mode) {
    DirectLexer lx(payload);

    ToolCallSequence seq;
    seq.return_mode = mode;
    if (!lx.accept('['))
        return ParseOutcome::failure("Syntax", "a direct call list must start with '['",
                                     std::make_pair(lx.pos, std::size_t{0}));
    if (lx.accept(']')) {
        if (!lx.at_end())
            return ParseOutcome::failure("Syntax", "trailing content after ']'");
        seq.is_no_call = true;
        return ParseOutcome::success(std::move(seq));
    }

    std::vector<ToolCall> calls;
    while (true) {
        auto tool = lx.read_identifier();
        if (!tool)
            return ParseOutcome::failure("Syntax", "expected a tool name",
                                         std::make_pair(lx.pos, std::size_t{0}));
        ToolCall call;
        call.id = static_cast<int>(calls.size()); // list position is the id
        call.tool_name = *tool;
        if (!lx.accept('('))
            return ParseOutcome::failure("Syntax", "expected '(' after tool name '" + *tool + "'");

        if (!lx.accept(')')) {
            while (true) {
                const std::size_t arg_start = lx.pos;
                auto name = lx.read_identifier();
                bool keyword_form = false;
                if (name) {
                    if (lx.accept('=')) {
                        keyword_form = true;
                    } else {
                        lx.pos = arg_start; // identifier was a bare value
                    }
                }
                if (!keyword_form)
                    return ParseOutcome::failure("PositionalArgument",
                                                 "arguments must use keyword form name=value",
                                                 std::make_pair(arg_start, std::size_t{0}));

                lx.skip_ws();
                char c = lx.peek();
                ArgValue value = ArgValue::from_boolean(false);
                if (c == '"' || c == '\'') {
                    auto str = lx.read_quoted_string();
                    if (!str) return ParseOutcome::failure("Syntax", "unterminated string literal");
                    value = ArgValue::from_string(*str);
                } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+') {
                    auto num = lx.read_number();
                    if (!num) return ParseOutcome::failure("Syntax", "malformed numeric literal");
                    value = *num;
                } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                    auto word = lx.read_identifier();
                    if (!word) return ParseOutcome::failure("Syntax", "malformed value token");
                    if (auto id = match_response_placeholder(*word)) {
                        value = ArgValue::from_ref(*id);
                    } else if (*word == "true" || *word == "True") {
                        value = ArgValue::from_boolean(true);
                    } else if (*word == "false" || *word == "False") {
                        value = ArgValue::from_boolean(false);
                    } else {
                        return ParseOutcome::failure("Syntax",
                                                     "bare identifier '" + *word + "' is not a value");
                    }
                } else if (c == '[' || c == '{') {
                    return ParseOutcome::failure("Syntax",
                                                 "composite values are not part of the direct format");
                } else {
                    return ParseOutcome::failure("Syntax", "expected a value after '='");
                }
                call.args.emplace_back(*name, std::move(value));

                if (lx.accept(',')) continue;
                if (lx.accept(')')) break;
                return ParseOutcome::failure("Syntax", "expected ',' or ')' in argument list");
            }
        }
        calls.push_back(std::move(call));

        if (lx.accept(',')) continue;
        if (lx.accept(']')) break;
        return ParseOutcome::failure("Syntax", "expected ',' or ']' after a call");
    }
    if (!lx.at_end())
        return ParseOutcome::failure("Syntax", "trailing content after ']'");

    if (auto err = finalize_calls(calls)) return ParseOutcome::failure(*err);
    seq.calls = std::move(calls);
    return ParseOutcome::success(std::move(seq));
}

// ---------------------------------------------------------------------------
// Dispatch and serialization

ParseOutcome parse_auto(const std::string& payload, ReturnMode mode) {
    for (char c : payload) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        if (c == '{') return parse_json_ast(payload, mode);
        if (c == '<') return parse_xml_ast(payload, mode);
        if (c == '[') return parse_direct_list(payload, mode);
        break;
    }
    return ParseOutcome::failure("UnrecognizedFormat",
                                 "payload does not begin with '{', '<' or '['");
}

ParseOutcome parse_model_response(const std::string& model_response) {
    auto extracted = extract_tool_call_block(model_response);
    if (std::holds_alternative<FormatError>(extracted))
        return ParseOutcome::failure(std::get<FormatError>(extracted));
    const auto& block = std::get<ExtractedBlock>(extracted);
    return parse_auto(block.payload, block.return_mode);
}

namespace {

std::string scalar_literal(const ArgValue& v) {
    switch (*v.scalar_kind()) {
        case ScalarKind::Integer: return std::to_string(v.as_integer());
        case ScalarKind::Float: return Json(v.as_float()).dump();
        case ScalarKind::Boolean: return v.as_boolean() ? "true" : "false";
        case ScalarKind::String: break;
    }
    return {};
}

std::string serialize_json_payload(const ToolCallSequence& seq) {
    Json doc = Json::object();
    for (const auto& call : seq.calls) {
        Json args = Json::object();
        for (const auto& [name, value] : call.args) args[name] = value.to_json();
        doc[std::to_string(call.id)] = Json{{call.tool_name, args}};
    }
    return doc.dump(2);
}

std::string serialize_xml_payload(const ToolCallSequence& seq) {
    std::ostringstream out;
    bool first = true;
    for (const auto& call : seq.calls) {
        if (!first) out << "\n\n";
        first = false;
        out << "<api id=\"" << call.id << "\">\n";
        out << "  <name>" << encode_entities(call.tool_name, false) << "</name>\n";
        for (const auto& [name, value] : call.args) {
            out << "  <param name=\"" << encode_entities(name, true) << "\">";
            if (value.is_ref()) {
                out << "<response api_id=\"" << value.ref_target() << "\"/>";
            } else if (value.scalar_kind() == ScalarKind::String) {
                out << encode_entities(value.as_string(), false);
            } else if (value.is_scalar()) {
                out << scalar_literal(value);
            } else {
                throw Error("UnrepresentableValue",
                            "the XML format cannot carry composite argument values");
            }
            out << "</param>\n";
        }
        out << "</api>";
    }
    return out.str();
}

std::string serialize_direct_payload(const ToolCallSequence& seq) {
    std::ostringstream out;
    out << "[";
    for (std::size_t i = 0; i < seq.calls.size(); ++i) {
        if (i > 0) out << ", ";
        const auto& call = seq.calls[i];
        out << call.tool_name << "(";
        for (std::size_t a = 0; a < call.args.size(); ++a) {
            if (a > 0) out << ", ";
            const auto& [name, value] = call.args[a];
            out << name << "=";
            if (value.is_ref()) {
                out << "API_RESPONSE_" << value.ref_target();
            } else if (value.scalar_kind() == ScalarKind::String) {
                out << Json(value.as_string()).dump();
            } else if (value.is_scalar()) {
                out << scalar_literal(value);
            } else {
                throw Error("UnrepresentableValue",
                            "the direct format cannot carry composite argument values");
            }
        }
        out << ")";
    }
    out << "]";
    return out.str();
}

} // namespace

std::string serialize(const ToolCallSequence& seq, IrFormat format) {
    if (seq.is_no_call) {
        switch (format) {
            case IrFormat::Json: return "{}";
            case IrFormat::Xml: return "";
            case IrFormat::Direct: return "[]";
        }
    }
    switch (format) {
        case IrFormat::Json: return serialize_json_payload(seq);
        case IrFormat::Xml: return serialize_xml_payload(seq);
        case IrFormat::Direct: return serialize_direct_payload(seq);
    }
    return {};
}

Json sequence_to_json(const ToolCallSequence& seq) {
    Json doc;
    doc["return_mode"] = seq.return_mode == ReturnMode::All ? "all" : "one";
    doc["no_call"] = seq.is_no_call;
    Json calls = Json::array();
    for (const auto& call : seq.calls) {
        Json rec;
        rec["id"] = call.id;
        rec["tool"] = call.tool_name;
        Json args = Json::object();
        for (const auto& [name, value] : call.args) args[name] = value.to_json();
        rec["args"] = args;
        calls.push_back(rec);
    }
    doc["calls"] = calls;
    return doc;
}

} // namespace tier
