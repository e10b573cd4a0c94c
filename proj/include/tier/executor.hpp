#pragma once

#include "tier/call_ir.hpp"
#include "tier/schema.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace tier {

struct ToolError {
    enum class Kind { UnknownTool, ArgumentRejected, RuntimeFault, UnresolvedReference };
    Kind kind = Kind::RuntimeFault;
    std::string message;
};

std::string tool_error_kind_name(ToolError::Kind kind);

using ToolOutcome = std::variant<Json, ToolError>;

inline bool outcome_ok(const ToolOutcome& o) { return std::holds_alternative<Json>(o); }

/// A deterministic tool environment: equal inputs must yield equal outputs.
class ToolBackend {
public:
    virtual ~ToolBackend() = default;
    virtual ToolOutcome invoke(const std::string& tool_name, const Json& args) const = 0;
};

/// The answer a sequence produced: a concrete value, or the NO-CALL marker.
struct FinalAnswer {
    bool no_call = false;
    Json value; // meaningful only when no_call is false
};

struct ExecutionStep {
    int call_id = 0;
    std::string tool_name;
    Json resolved_args;
    ToolOutcome outcome;
};

struct ExecutionTrace {
    std::vector<ExecutionStep> steps;
    bool all_succeeded = true;
    std::optional<FinalAnswer> final_answer; // present iff all_succeeded (NO-CALL included)

    Json to_json() const;
};

/// Replaces every API_RESPONSE_<k> placeholder in the call's arguments by
/// prior_outputs[k], descending into composites. Throws
/// Error("UnresolvedReference") when a referenced output is absent.
Json resolve_arguments(const ToolCall& call, const std::map<int, Json>& prior_outputs);

/// Runs calls in id order. On a failure, calls that transitively depend on
/// the failed one are recorded as UnresolvedReference without touching the
/// backend; independent later calls still run.
ExecutionTrace execute_sequence(const ToolCallSequence& seq, const ToolBackend& backend);

/// One output under the sequence's return mode: the final call's output
/// (One) or all outputs keyed by call id (All). Throws
/// Error("AnswerUnavailable") when the trace did not fully succeed.
FinalAnswer final_answer(const ExecutionTrace& trace, ReturnMode mode);

/// Backend that echoes resolved arguments back, with omitted optionals
/// materialized to their declared defaults.
std::unique_ptr<ToolBackend> make_echo_backend(const ToolRegistry& registry);

/// Backend over the shipped fixture tables (restaurants, prices, rates,
/// dealerships, listings, and the time/location/date constants).
std::unique_ptr<ToolBackend> make_fixture_backend(const Json& fixtures);

} // namespace tier
