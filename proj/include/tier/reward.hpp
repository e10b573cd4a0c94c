#pragma once

#include "tier/call_ir.hpp"
#include "tier/executor.hpp"
#include "tier/schema.hpp"
#include "tier/verifier.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tier {

/// Reward weighting and component selection. Format and answer are always
/// active; parse and exec can be ablated, in which case their weight is
/// removed from the normalizing maximum (the remaining total renormalizes
/// to [0,1]).
struct RewardConfig {
    double lambda_p = 0.25;     // per-mismatch penalty slope
    double answer_weight = 5.0; // weight of final-answer correctness
    bool parse_enabled = true;
    bool exec_enabled = true;
    double name_weight = 1.0;
    double param_weight = 1.0;
    double dtype_weight = 1.0;
    double answer_tolerance = 1e-9;

    double active_maximum() const {
        return 1.0 + (parse_enabled ? name_weight + param_weight + dtype_weight : 0.0) +
               (exec_enabled ? 1.0 : 0.0) + answer_weight;
    }

    /// Reads {lambda_p?, answer_weight?, components?, ...} — see
    /// docs/formats.md. A components list lacking "format" or "answer" is
    /// rejected.
    static RewardConfig from_json(const Json& doc);
    Json to_json() const;
};

/// Expected answer for one task: a concrete value (with optional unordered
/// array sites, JSON-pointer style) or the NO-CALL marker.
struct GoldSpec {
    bool no_call = false;
    Json value;
    std::vector<std::string> unordered_paths;

    static GoldSpec from_json(const Json& doc);
    Json to_json() const;
};

enum class GatingNote { None, FormatFailed, NamesInvalid, ExecutionFailed };

std::string gating_note_name(GatingNote note);

struct RewardBreakdown {
    double r_format = 0.0; // 0 or 1
    double r_name = 0.0;   // 0 or 1
    double r_param = 0.0;  // in [0,1]
    double r_dtype = 0.0;  // in [0,1]
    double r_parse = 0.0;  // weighted sum of the three above; 0 on any bad name
    double r_exec = 0.0;   // 0 or 1
    double r_answer = 0.0; // 0 or answer_weight
    double raw_total = 0.0;
    double total = 0.0; // raw_total / active maximum, in [0,1]
    GatingNote gating_note = GatingNote::None;

    Json to_json() const;
};

/// clip(1 - lambda_p * p, 0, 1)
double clip_linear(int mismatches, double lambda_p);

/// Deep canonical equality between a produced answer and the gold spec:
/// numbers compare at absolute-or-relative tolerance, object key order is
/// insignificant, arrays are ordered unless their site is marked unordered,
/// and NO-CALL matches only a no-call gold.
bool answers_equal(const FinalAnswer& candidate, const GoldSpec& gold, double tolerance = 1e-9);

/// The full graded reward. `report` and `trace` must be present iff the
/// parse succeeded.
RewardBreakdown compute_reward(const ParseOutcome& parse, const VerificationReport* report,
                               const ExecutionTrace* trace, const GoldSpec& gold,
                               const RewardConfig& config);

/// Binary baseline: format validity plus answer correctness only (answer
/// credit still requires full execution — an unexecuted sequence has no
/// final output to match).
RewardBreakdown compute_simple_reward(const ParseOutcome& parse, const ExecutionTrace* trace,
                                      const GoldSpec& gold, const RewardConfig& config);

/// Order-preserving comparison against a reference trajectory where only
/// required parameters are scored; optionals (and unknown names) are
/// ignored on both sides.
bool relaxed_trajectory_match(const ToolCallSequence& seq, const ToolCallSequence& gold_traj,
                              const ToolRegistry& registry);

/// Convenience composition of extract -> parse -> verify -> execute ->
/// reward over one raw model response.
struct PipelineResult {
    std::optional<ToolCallSequence> sequence;
    std::optional<FormatError> format_error;
    std::optional<VerificationReport> report;
    std::optional<ExecutionTrace> trace;
    RewardBreakdown breakdown;
};

PipelineResult score_response(const std::string& model_response, const ToolRegistry& registry,
                              const ToolBackend& backend, const GoldSpec& gold,
                              const RewardConfig& config, bool simple_mode = false);

} // namespace tier
