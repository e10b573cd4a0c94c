#include "tier/verifier.hpp"

namespace tier {

namespace {

bool value_matches_dtype(const ArgValue& value, Dtype declared) {
    if (declared == Dtype::Any) return true;
    if (value.is_ref()) return true; // static type unknown; judged at execution
    switch (declared) {
        case Dtype::String: return value.scalar_kind() == ScalarKind::String;
        case Dtype::Integer: return value.scalar_kind() == ScalarKind::Integer;
        case Dtype::Float: // integers widen to float
            return value.scalar_kind() == ScalarKind::Float ||
                   value.scalar_kind() == ScalarKind::Integer;
        case Dtype::Boolean: return value.scalar_kind() == ScalarKind::Boolean;
        case Dtype::Object: return value.is_object();
        case Dtype::Array: return value.is_array();
        case Dtype::Any: return true;
    }
    return true;
}

const ParameterSpec* find_spec(const std::vector<ParameterSpec>& specs, const std::string& name) {
    for (const auto& s : specs)
        if (s.name == name) return &s;
    return nullptr;
}

// Walks one level of supplied arguments against the matching specs,
// recursing into object values wherever the schema declares nested specs.
// One mismatch unit per offending name per call; an unknown-named argument
// never also counts as a dtype mismatch.
void check_level(const std::vector<std::pair<std::string, ArgValue>>& supplied,
                 const std::vector<ParameterSpec>& specs, const std::string& path,
                 CallVerification& detail) {
    for (const auto& spec : specs) {
        if (!spec.required) continue;
        bool present = false;
        for (const auto& [name, _] : supplied)
            if (name == spec.name) present = true;
        if (!present) detail.missing_required.push_back(path + spec.name);
    }
    for (const auto& [name, value] : supplied) {
        const ParameterSpec* spec = find_spec(specs, name);
        if (!spec) {
            detail.unknown_names.push_back(path + name);
            continue;
        }
        if (!value_matches_dtype(value, spec->dtype)) {
            detail.type_failed.push_back(path + name);
            continue;
        }
        if (!spec->nested.empty() && value.is_object()) {
            std::vector<std::pair<std::string, ArgValue>> inner(value.as_object().begin(),
                                                                value.as_object().end());
            check_level(inner, spec->nested, path + name + ".", detail);
        }
    }
}

CallVerification verify_call(const ToolCall& call, const ToolRegistry& registry) {
    CallVerification detail;
    detail.call_id = call.id;
    detail.tool_name = call.tool_name;
    const FunctionSchema* schema = registry.lookup(call.tool_name);
    detail.name_valid = schema != nullptr;
    if (schema) check_level(call.args, schema->parameters, "", detail);
    return detail;
}

} // namespace

std::pair<bool, std::vector<std::pair<int, std::string>>>
verify_names(const ToolCallSequence& seq, const ToolRegistry& registry) {
    std::vector<std::pair<int, std::string>> invalid;
    for (const auto& call : seq.calls)
        if (!registry.lookup(call.tool_name)) invalid.emplace_back(call.id, call.tool_name);
    return {invalid.empty(), invalid};
}

int count_param_mismatches(const ToolCallSequence& seq, const ToolRegistry& registry) {
    int total = 0;
    for (const auto& call : seq.calls) {
        CallVerification d = verify_call(call, registry);
        if (!d.name_valid) continue;
        total += static_cast<int>(d.missing_required.size() + d.unknown_names.size());
    }
    return total;
}

int count_dtype_mismatches(const ToolCallSequence& seq, const ToolRegistry& registry) {
    int total = 0;
    for (const auto& call : seq.calls) {
        CallVerification d = verify_call(call, registry);
        if (!d.name_valid) continue;
        total += static_cast<int>(d.type_failed.size());
    }
    return total;
}

VerificationReport verify_sequence(const ToolCallSequence& seq, const ToolRegistry& registry) {
    VerificationReport report;
    for (const auto& call : seq.calls) {
        CallVerification detail = verify_call(call, registry);
        if (!detail.name_valid) {
            report.all_names_valid = false;
            report.invalid_names.emplace_back(call.id, call.tool_name);
        } else {
            report.param_mismatches +=
                static_cast<int>(detail.missing_required.size() + detail.unknown_names.size());
            report.dtype_mismatches += static_cast<int>(detail.type_failed.size());
        }
        report.per_call.push_back(std::move(detail));
    }
    return report;
}

Json VerificationReport::to_json() const {
    Json doc;
    doc["all_names_valid"] = all_names_valid;
    Json invalid = Json::array();
    for (const auto& [id, name] : invalid_names)
        invalid.push_back(Json{{"call_id", id}, {"name", name}});
    doc["invalid_names"] = invalid;
    doc["param_mismatches"] = param_mismatches;
    doc["dtype_mismatches"] = dtype_mismatches;
    Json calls = Json::array();
    for (const auto& c : per_call) {
        Json rec;
        rec["call_id"] = c.call_id;
        rec["tool"] = c.tool_name;
        rec["name_valid"] = c.name_valid;
        rec["missing_required"] = c.missing_required;
        rec["unknown_names"] = c.unknown_names;
        rec["type_failed"] = c.type_failed;
        calls.push_back(rec);
    }
    doc["per_call"] = calls;
    return doc;
}

} // namespace tier
