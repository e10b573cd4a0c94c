#include "tier/rl_math.hpp"

#include <algorithm>
#include <cmath>

namespace tier {

AdvantageResult group_advantages(const RolloutGroup& group, double epsilon) {
    const std::size_t k = group.rewards.size();
    if (k < 2)
        throw Error("GroupTooSmall", "a rollout group needs at least 2 trajectories, got " +
                                         std::to_string(k));

    // A constant group normalizes to all-zero advantages exactly; computing
    // it through the mean would leave 1-ulp residue for non-dyadic rewards.
    const bool constant = std::all_of(group.rewards.begin(), group.rewards.end(),
                                      [&](double r) { return r == group.rewards.front(); });
    if (constant) {
        AdvantageResult out;
        out.group_mean = group.rewards.front();
        out.group_std = 0.0;
        out.epsilon = epsilon;
        out.advantages.assign(k, 0.0);
        return out;
    }

    double sum = 0.0;
    for (double r : group.rewards) sum += r;
    const double mean = sum / static_cast<double>(k);

    double sq = 0.0;
    for (double r : group.rewards) sq += (r - mean) * (r - mean);
    const double stddev = std::sqrt(sq / static_cast<double>(k));

    AdvantageResult out;
    out.group_mean = mean;
    out.group_std = stddev;
    out.epsilon = epsilon;
    out.advantages.reserve(k);
    for (double r : group.rewards) out.advantages.push_back((r - mean) / (stddev + epsilon));
    return out;
}

double clipped_surrogate_loss(const std::vector<std::pair<TokenLogProbs, double>>& batch,
                              double clip_epsilon) {
    if (batch.empty()) throw Error("EmptyBatch", "the loss needs at least one trajectory");

    double term_sum = 0.0;
    long token_count = 0;
    for (const auto& [logprobs, advantage] : batch) {
        if (logprobs.old.size() != logprobs.current.size())
            throw Error("LengthMismatch", "current/old log-prob rows differ in length");
        for (std::size_t t = 0; t < logprobs.current.size(); ++t) {
            const double ratio = std::exp(logprobs.current[t] - logprobs.old[t]);
            const double clipped =
                std::max(1.0 - clip_epsilon, std::min(1.0 + clip_epsilon, ratio));
            term_sum += std::min(ratio * advantage, clipped * advantage);
            ++token_count;
        }
    }
    if (token_count == 0) throw Error("EmptyBatch", "no active tokens in batch");
    return -term_sum / static_cast<double>(token_count);
}

double k3_kl(double current_logprob, double reference_logprob) {
    const double d = reference_logprob - current_logprob;
    return std::exp(d) - d - 1.0;
}

LossReport total_loss(const std::vector<std::pair<TokenLogProbs, double>>& batch,
                      double clip_epsilon, double lambda_kl) {
    LossReport report;
    report.clip_epsilon = clip_epsilon;
    report.lambda_kl = lambda_kl;
    report.pg_loss = clipped_surrogate_loss(batch, clip_epsilon);

    double kl_sum = 0.0;
    long token_count = 0;
    for (const auto& [logprobs, _] : batch) {
        if (logprobs.reference.size() != logprobs.current.size())
            throw Error("LengthMismatch", "current/reference log-prob rows differ in length");
        for (std::size_t t = 0; t < logprobs.current.size(); ++t) {
            kl_sum += k3_kl(logprobs.current[t], logprobs.reference[t]);
            ++token_count;
        }
    }
    report.active_token_count = token_count;
    report.kl_penalty = lambda_kl / static_cast<double>(token_count) * kl_sum;
    report.total_loss = report.pg_loss + report.kl_penalty;
    return report;
}

SmoothedCurve ewma_curve(const std::vector<double>& series, double alpha, std::size_t window) {
    if (series.empty()) throw Error("EmptySeries", "the curve needs at least one point");
    if (alpha <= 0.0 || alpha > 1.0)
        throw Error("BadSmoothingConstant", "alpha must lie in (0,1]");
    if (window == 0) throw Error("BadWindow", "window must be positive");

    SmoothedCurve out;
    out.smoothed.reserve(series.size());
    out.rolling_std.reserve(series.size());
    for (std::size_t t = 0; t < series.size(); ++t) {
        if (t == 0)
            out.smoothed.push_back(series[0]);
        else
            out.smoothed.push_back(alpha * series[t] + (1.0 - alpha) * out.smoothed[t - 1]);

        const std::size_t n = std::min(window, t + 1);
        const std::size_t begin = t + 1 - n;
        double sum = 0.0;
        for (std::size_t i = begin; i <= t; ++i) sum += series[i];
        const double mean = sum / static_cast<double>(n);
        double sq = 0.0;
        for (std::size_t i = begin; i <= t; ++i) sq += (series[i] - mean) * (series[i] - mean);
        out.rolling_std.push_back(std::sqrt(sq / static_cast<double>(n)));
    }
    return out;
}

Json AdvantageResult::to_json() const {
    return Json{{"advantages", advantages},
                {"mean", group_mean},
                {"std", group_std},
                {"epsilon", epsilon}};
}

Json LossReport::to_json() const {
    return Json{{"pg_loss", pg_loss},
                {"kl_penalty", kl_penalty},
                {"total_loss", total_loss},
                {"active_token_count", active_token_count},
                {"clip_epsilon", clip_epsilon},
                {"lambda_kl", lambda_kl}};
}

} // namespace tier
