#pragma once

#include "tier/common.hpp"

#include <string>
#include <vector>

namespace tier {

/// Rewards of the K trajectories sampled for one prompt.
struct RolloutGroup {
    std::string prompt_id;
    std::vector<double> rewards; // each in [0,1]
};

/// Per-token log-probabilities for one trajectory under the current, old,
/// and reference policies. All three rows share the active-token length.
struct TokenLogProbs {
    std::vector<double> current;
    std::vector<double> old;
    std::vector<double> reference;

    std::size_t length() const { return current.size(); }
};

struct AdvantageResult {
    std::vector<double> advantages;
    double group_mean = 0.0;
    double group_std = 0.0; // population convention
    double epsilon = 1e-4;

    Json to_json() const;
};

struct LossReport {
    double pg_loss = 0.0;
    double kl_penalty = 0.0;
    double total_loss = 0.0;
    long active_token_count = 0;
    double clip_epsilon = 0.0;
    double lambda_kl = 0.04;

    Json to_json() const;
};

/// (R_i - mean) / (std + epsilon), population std. Throws
/// Error("GroupTooSmall") for groups under two trajectories.
AdvantageResult group_advantages(const RolloutGroup& group, double epsilon = 1e-4);

/// Token-level clipped surrogate, normalized by the total active tokens in
/// the batch. Summation is left-to-right over the given ordering.
double clipped_surrogate_loss(const std::vector<std::pair<TokenLogProbs, double>>& batch,
                              double clip_epsilon);

/// Per-token KL estimate exp(d) - d - 1 with d = reference - current;
/// non-negative, zero iff the two log-probs coincide.
double k3_kl(double current_logprob, double reference_logprob);

/// Clipped surrogate plus the token-summed k3 penalty scaled by
/// lambda_kl / total active tokens.
LossReport total_loss(const std::vector<std::pair<TokenLogProbs, double>>& batch,
                      double clip_epsilon, double lambda_kl);

/// Training-curve statistics: EWMA (seeded at the first raw value) and the
/// population std over a trailing window of raw values.
struct SmoothedCurve {
    std::vector<double> smoothed;
    std::vector<double> rolling_std;
};

SmoothedCurve ewma_curve(const std::vector<double>& series, double alpha, std::size_t window);

} // namespace tier
