#pragma once

#include "tier/common.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace tier {

enum class ReturnMode { One, All };

class ArgValue;

/// Scalar kinds a parsed argument can canonically take.
enum class ScalarKind { String, Integer, Float, Boolean };

/// One argument value: a scalar, a composite (object/array), or a reference
/// to the output of an earlier call (the `API_RESPONSE_<id>` placeholder).
class ArgValue {
public:
    struct ResponseRef {
        int target_id = 0;
    };
    using Object = std::vector<std::pair<std::string, ArgValue>>;
    using Array = std::vector<ArgValue>;

    static ArgValue from_string(std::string s);
    static ArgValue from_integer(std::int64_t v);
    static ArgValue from_float(double v);
    static ArgValue from_boolean(bool v);
    static ArgValue from_object(Object fields);
    static ArgValue from_array(Array items);
    static ArgValue from_ref(int target_id);

    bool is_ref() const { return std::holds_alternative<ResponseRef>(v_); }
    bool is_object() const { return std::holds_alternative<Object>(v_); }
    bool is_array() const { return std::holds_alternative<Array>(v_); }
    bool is_scalar() const;
    std::optional<ScalarKind> scalar_kind() const;

    int ref_target() const { return std::get<ResponseRef>(v_).target_id; }
    const std::string& as_string() const { return std::get<std::string>(v_); }
    std::int64_t as_integer() const { return std::get<std::int64_t>(v_); }
    double as_float() const { return std::get<double>(v_); }
    bool as_boolean() const { return std::get<bool>(v_); }
    const Object& as_object() const { return std::get<Object>(v_); }
    const Array& as_array() const { return std::get<Array>(v_); }

    /// Canonical JSON image: refs render as "API_RESPONSE_<id>" strings.
    Json to_json() const;

    /// Inverse of to_json: strings matching the whole-string placeholder
    /// pattern become refs; null is unrepresentable and rejected upstream.
    static ArgValue from_json(const Json& j);

    /// Appends every ref target reachable from this value (nested included).
    void collect_refs(std::vector<int>& out) const;

    /// Structural equality; object fields compare by key, order-insensitive.
    friend bool operator==(const ArgValue& a, const ArgValue& b);

private:
    std::variant<std::string, std::int64_t, double, bool, Object, Array, ResponseRef> v_;
};

/// Whole-string placeholder test: `API_RESPONSE_` + decimal digits, nothing
/// else. Partial matches stay plain strings.
std::optional<int> match_response_placeholder(const std::string& s);

struct ToolCall {
    int id = 0;
    std::string tool_name;
    std::vector<std::pair<std::string, ArgValue>> args; // emission order, names distinct

    const ArgValue* find_arg(const std::string& name) const;

    friend bool operator==(const ToolCall& a, const ToolCall& b);
};

struct ToolCallSequence {
    std::vector<ToolCall> calls; // ids 0..n-1, ascending
    ReturnMode return_mode = ReturnMode::One;
    bool is_no_call = false; // true iff calls is empty

    friend bool operator==(const ToolCallSequence& a, const ToolCallSequence& b);
};

struct FormatError {
    std::string code;    // e.g. "NonContiguousIds", "ForwardReference"
    std::string message; // non-empty diagnostic
    std::optional<std::pair<std::size_t, std::size_t>> span; // offset, length
};

class ParseOutcome {
public:
    static ParseOutcome success(ToolCallSequence seq) { return ParseOutcome(std::move(seq)); }
    static ParseOutcome failure(FormatError err) { return ParseOutcome(std::move(err)); }
    static ParseOutcome failure(std::string code, std::string message,
                                std::optional<std::pair<std::size_t, std::size_t>> span = {}) {
        return ParseOutcome(FormatError{std::move(code), std::move(message), span});
    }

    bool ok() const { return std::holds_alternative<ToolCallSequence>(v_); }
    const ToolCallSequence& sequence() const { return std::get<ToolCallSequence>(v_); }
    const FormatError& error() const { return std::get<FormatError>(v_); }

private:
    explicit ParseOutcome(ToolCallSequence seq) : v_(std::move(seq)) {}
    explicit ParseOutcome(FormatError err) : v_(std::move(err)) {}
    std::variant<ToolCallSequence, FormatError> v_;
};

/// Result of locating the `<tool_call return="...">` region in a raw model
/// response; `<think>` blocks are stripped before the search.
struct ExtractedBlock {
    std::string payload;
    ReturnMode return_mode = ReturnMode::One;
};
using ExtractOutcome = std::variant<ExtractedBlock, FormatError>;

ExtractOutcome extract_tool_call_block(const std::string& model_response);

ParseOutcome parse_json_ast(const std::string& payload, ReturnMode mode = ReturnMode::One);
ParseOutcome parse_xml_ast(const std::string& payload, ReturnMode mode = ReturnMode::One);
ParseOutcome parse_direct_list(const std::string& payload, ReturnMode mode = ReturnMode::One);

/// Dispatches on the first non-whitespace character:
/// '{' -> JSON AST, '<' -> XML AST, '[' -> direct list.
ParseOutcome parse_auto(const std::string& payload, ReturnMode mode = ReturnMode::One);

/// Full pipeline for a raw model response: extract the wrapper, then
/// parse_auto the payload under the wrapper's return mode.
ParseOutcome parse_model_response(const std::string& model_response);

enum class IrFormat { Json, Xml, Direct };

/// Emits a payload that reparses (in the same format, same return mode) to a
/// sequence equal to `seq`. Throws Error("UnrepresentableValue") when the
/// target grammar cannot carry the sequence's argument shapes: composites
/// exist only in the JSON format.
std::string serialize(const ToolCallSequence& seq, IrFormat format);

/// Canonical sequence document used by the CLI and the bench harness.
Json sequence_to_json(const ToolCallSequence& seq);

} // namespace tier
