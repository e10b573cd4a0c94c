#pragma once

#include "tier/call_ir.hpp"
#include "tier/schema.hpp"

#include <string>
#include <vector>

namespace tier {

/// Per-call verification detail, one record per call in id order.
struct CallVerification {
    int call_id = 0;
    std::string tool_name;
    bool name_valid = false;
    std::vector<std::string> missing_required; // dotted paths for nested params
    std::vector<std::string> unknown_names;
    std::vector<std::string> type_failed;
};

/// Schema-adherence evidence for one parsed sequence. The two mismatch
/// counters are the inputs to the graded parse reward; they cover calls with
/// valid names only (an unknown tool has no schema to check against).
struct VerificationReport {
    bool all_names_valid = true;
    std::vector<std::pair<int, std::string>> invalid_names; // (call id, name)
    int param_mismatches = 0; // missing-required + unknown-name, all calls
    int dtype_mismatches = 0; // type-failed supplied arguments, all calls
    std::vector<CallVerification> per_call;

    Json to_json() const;
};

std::pair<bool, std::vector<std::pair<int, std::string>>>
verify_names(const ToolCallSequence& seq, const ToolRegistry& registry);

int count_param_mismatches(const ToolCallSequence& seq, const ToolRegistry& registry);
int count_dtype_mismatches(const ToolCallSequence& seq, const ToolRegistry& registry);

VerificationReport verify_sequence(const ToolCallSequence& seq, const ToolRegistry& registry);

} // namespace tier
