#include "tier/reward.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace tier {

double clip_linear(int mismatches, double lambda_p) {
    return std::max(0.0, std::min(1.0, 1.0 - lambda_p * static_cast<double>(mismatches)));
}

std::string gating_note_name(GatingNote note) {
    switch (note) {
        case GatingNote::None: return "none";
        case GatingNote::FormatFailed: return "format_failed";
        case GatingNote::NamesInvalid: return "names_invalid";
        case GatingNote::ExecutionFailed: return "execution_failed";
    }
    return "none";
}

RewardConfig RewardConfig::from_json(const Json& doc) {
    RewardConfig cfg;
    if (!doc.is_object()) throw Error("MalformedConfig", "config document must be an object");
    if (doc.contains("lambda_p")) cfg.lambda_p = doc["lambda_p"].get<double>();
    if (doc.contains("answer_weight")) cfg.answer_weight = doc["answer_weight"].get<double>();
    if (doc.contains("name_weight")) cfg.name_weight = doc["name_weight"].get<double>();
    if (doc.contains("param_weight")) cfg.param_weight = doc["param_weight"].get<double>();
    if (doc.contains("dtype_weight")) cfg.dtype_weight = doc["dtype_weight"].get<double>();
    if (doc.contains("answer_tolerance")) cfg.answer_tolerance = doc["answer_tolerance"].get<double>();
    if (doc.contains("components")) {
        std::set<std::string> mask;
        for (const auto& c : doc["components"]) mask.insert(c.get<std::string>());
        if (!mask.count("format") || !mask.count("answer"))
            throw Error("InvalidComponentMask", "format and answer cannot be removed");
        for (const auto& name : mask)
            if (name != "format" && name != "parse" && name != "exec" && name != "answer")
                throw Error("InvalidComponentMask", "unknown component '" + name + "'");
        cfg.parse_enabled = mask.count("parse") > 0;
        cfg.exec_enabled = mask.count("exec") > 0;
    }
    if (cfg.lambda_p < 0 || cfg.answer_weight < 0 || cfg.name_weight < 0 || cfg.param_weight < 0 ||
        cfg.dtype_weight < 0)
        throw Error("MalformedConfig", "weights must be non-negative");
    return cfg;
}

Json RewardConfig::to_json() const {
    Json components = Json::array({"format"});
    if (parse_enabled) components.push_back("parse");
    if (exec_enabled) components.push_back("exec");
    components.push_back("answer");
    return Json{{"lambda_p", lambda_p},
                {"answer_weight", answer_weight},
                {"components", components},
                {"name_weight", name_weight},
                {"param_weight", param_weight},
                {"dtype_weight", dtype_weight},
                {"answer_tolerance", answer_tolerance}};
}

GoldSpec GoldSpec::from_json(const Json& doc) {
    GoldSpec gold;
    if (!doc.is_object()) throw Error("MalformedGoldSpec", "gold document must be an object");
    gold.no_call = doc.value("no_call", false);
    if (!gold.no_call) {
        if (!doc.contains("value"))
            throw Error("MalformedGoldSpec", "gold document needs a value unless no_call is true");
        gold.value = doc["value"];
    }
    if (doc.contains("unordered"))
        for (const auto& p : doc["unordered"]) gold.unordered_paths.push_back(p.get<std::string>());
    return gold;
}

Json GoldSpec::to_json() const {
    Json doc;
    doc["no_call"] = no_call;
    if (!no_call) doc["value"] = value;
    if (!unordered_paths.empty()) doc["unordered"] = unordered_paths;
    return doc;
}

// ---------------------------------------------------------------------------
// Answer equality

namespace {

bool numbers_equal(double a, double b, double tol) {
    const double diff = std::fabs(a - b);
    return diff <= tol || diff <= tol * std::max(std::fabs(a), std::fabs(b));
}

bool values_equal(const Json& a, const Json& b, double tol,
                  const std::set<std::string>& unordered, const std::string& path) {
    if (a.is_number() && b.is_number())
        return numbers_equal(a.get<double>(), b.get<double>(), tol);
    if (a.type() != b.type()) return false;
    if (a.is_object()) {
        if (a.size() != b.size()) return false;
        for (auto it = a.begin(); it != a.end(); ++it) {
            if (!b.contains(it.key())) return false;
            if (!values_equal(it.value(), b[it.key()], tol, unordered, path + "/" + it.key()))
                return false;
        }
        return true;
    }
    if (a.is_array()) {
        if (a.size() != b.size()) return false;
        if (unordered.count(path)) {
            std::vector<bool> used(b.size(), false);
            for (const auto& x : a) {
                bool matched = false;
                for (std::size_t j = 0; j < b.size(); ++j) {
                    if (used[j]) continue;
                    if (values_equal(x, b[j], tol, unordered, path + "/*")) {
                        used[j] = true;
                        matched = true;
                        break;
                    }
                }
                if (!matched) return false;
            }
            return true;
        }
        for (std::size_t i = 0; i < a.size(); ++i)
            if (!values_equal(a[i], b[i], tol, unordered, path + "/" + std::to_string(i)))
                return false;
        return true;
    }
    return a == b;
}

} // namespace

bool answers_equal(const FinalAnswer& candidate, const GoldSpec& gold, double tolerance) {
    if (candidate.no_call || gold.no_call) return candidate.no_call && gold.no_call;
    std::set<std::string> unordered(gold.unordered_paths.begin(), gold.unordered_paths.end());
    return values_equal(candidate.value, gold.value, tolerance, unordered, "");
}

// ---------------------------------------------------------------------------
// Reward composition

RewardBreakdown compute_reward(const ParseOutcome& parse, const VerificationReport* report,
                               const ExecutionTrace* trace, const GoldSpec& gold,
                               const RewardConfig& config) {
    RewardBreakdown out;
    const double active_max = config.active_maximum();

    if (!parse.ok()) {
        out.gating_note = GatingNote::FormatFailed;
        return out; // everything stays zero
    }
    if (!report || !trace)
        throw Error("MissingStage", "verification report and trace are required after a parse");

    out.r_format = 1.0;
    if (!report->all_names_valid) {
        // An unresolvable name leaves nothing to verify or execute against.
        out.gating_note = GatingNote::NamesInvalid;
        out.raw_total = out.r_format;
        out.total = out.raw_total / active_max;
        return out;
    }

    out.r_name = 1.0;
    out.r_param = clip_linear(report->param_mismatches, config.lambda_p);
    out.r_dtype = clip_linear(report->dtype_mismatches, config.lambda_p);
    out.r_parse = config.name_weight * out.r_name + config.param_weight * out.r_param +
                  config.dtype_weight * out.r_dtype;

    out.r_exec = trace->all_succeeded ? 1.0 : 0.0;
    if (trace->all_succeeded && trace->final_answer &&
        answers_equal(*trace->final_answer, gold, config.answer_tolerance))
        out.r_answer = config.answer_weight;
    if (!trace->all_succeeded) out.gating_note = GatingNote::ExecutionFailed;

    out.raw_total = out.r_format + (config.parse_enabled ? out.r_parse : 0.0) +
                    (config.exec_enabled ? out.r_exec : 0.0) + out.r_answer;
    out.total = out.raw_total / active_max;
    return out;
}

RewardBreakdown compute_simple_reward(const ParseOutcome& parse, const ExecutionTrace* trace,
                                      const GoldSpec& gold, const RewardConfig& config) {
    RewardBreakdown out;
    const double active_max = 1.0 + config.answer_weight;

    if (!parse.ok()) {
        out.gating_note = GatingNote::FormatFailed;
        return out;
    }
    if (!trace) throw Error("MissingStage", "a trace is required after a parse");

    out.r_format = 1.0;
    if (trace->all_succeeded && trace->final_answer &&
        answers_equal(*trace->final_answer, gold, config.answer_tolerance))
        out.r_answer = config.answer_weight;
    if (!trace->all_succeeded) out.gating_note = GatingNote::ExecutionFailed;

    out.raw_total = out.r_format + out.r_answer;
    out.total = out.raw_total / active_max;
    return out;
}

bool relaxed_trajectory_match(const ToolCallSequence& seq, const ToolCallSequence& gold_traj,
                              const ToolRegistry& registry) {
    if (seq.is_no_call || gold_traj.is_no_call) return seq.is_no_call == gold_traj.is_no_call;
    if (seq.calls.size() != gold_traj.calls.size()) return false;
    for (std::size_t i = 0; i < seq.calls.size(); ++i) {
        const ToolCall& cand = seq.calls[i];
        const ToolCall& gold = gold_traj.calls[i];
        if (cand.tool_name != gold.tool_name) return false;
        const FunctionSchema* schema = registry.lookup(gold.tool_name);
        if (!schema) return false;
        for (const auto& spec : schema->parameters) {
            if (!spec.required) continue; // optionals are not scored
            const ArgValue* a = cand.find_arg(spec.name);
            const ArgValue* b = gold.find_arg(spec.name);
            if ((a == nullptr) != (b == nullptr)) return false;
            if (a && b && !(*a == *b)) return false;
        }
    }
    return true;
}

Json RewardBreakdown::to_json() const {
    return Json{{"r_format", r_format}, {"r_name", r_name},     {"r_param", r_param},
                {"r_dtype", r_dtype},   {"r_parse", r_parse},   {"r_exec", r_exec},
                {"r_answer", r_answer}, {"raw_total", raw_total}, {"total", total},
                {"gating_note", gating_note_name(gating_note)}};
}

PipelineResult score_response(const std::string& model_response, const ToolRegistry& registry,
                              const ToolBackend& backend, const GoldSpec& gold,
                              const RewardConfig& config, bool simple_mode) {
    PipelineResult result;
    ParseOutcome parse = parse_model_response(model_response);
    if (!parse.ok()) {
        result.format_error = parse.error();
        result.breakdown = simple_mode ? compute_simple_reward(parse, nullptr, gold, config)
                                       : compute_reward(parse, nullptr, nullptr, gold, config);
        return result;
    }
    result.sequence = parse.sequence();
    result.report = verify_sequence(*result.sequence, registry);
    result.trace = execute_sequence(*result.sequence, backend);
    result.breakdown = simple_mode
                           ? compute_simple_reward(parse, &*result.trace, gold, config)
                           : compute_reward(parse, &*result.report, &*result.trace, gold, config);
    return result;
}

} // namespace tier
