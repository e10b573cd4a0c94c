#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "testutil.hpp"
#include "tier/rl_math.hpp"

#include <cmath>

using namespace tier;

namespace {

// independent mean/std oracle, written before freezing the expected values
std::pair<double, double> naive_mean_std(const std::vector<double>& xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / static_cast<double>(xs.size());
    double sq = 0.0;
    for (double x : xs) sq += (x - mean) * (x - mean);
    return {mean, std::sqrt(sq / static_cast<double>(xs.size()))};
}

} // namespace

TEST_CASE("advantages: constant group is all zeros") {
    AdvantageResult r = group_advantages({"p", {0.5, 0.5, 0.5}}, 1e-4);
    for (double a : r.advantages) CHECK(a == 0.0);
    CHECK(r.group_std == 0.0);
}

TEST_CASE("advantages: the [1,0] pair lands at +-0.5/0.5001") {
    AdvantageResult r = group_advantages({"p", {1.0, 0.0}}, 1e-4);
    // oracle: mean 0.5, population std 0.5, A = +-0.5 / 0.5001
    CHECK(r.group_mean == 0.5);
    CHECK(r.group_std == 0.5);
    CHECK(r.advantages[0] == doctest::Approx(0.5 / 0.5001).epsilon(1e-12));
    CHECK(r.advantages[1] == doctest::Approx(-0.5 / 0.5001).epsilon(1e-12));
    CHECK(r.advantages[0] == doctest::Approx(0.99980).epsilon(1e-4));
}

TEST_CASE("advantages: four-element group against the frozen oracle values") {
    // oracle recomputation: mean 0.5, sigma = sqrt(0.065)
    auto [mean, sigma] = naive_mean_std({0.2, 0.4, 0.9, 0.5});
    CHECK(mean == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(sigma == doctest::Approx(std::sqrt(0.065)).epsilon(1e-15));
    AdvantageResult r = group_advantages({"p", {0.2, 0.4, 0.9, 0.5}}, 0.0);
    CHECK(r.advantages[0] == doctest::Approx(-1.17670).epsilon(1e-5));
    CHECK(r.advantages[1] == doctest::Approx(-0.39223).epsilon(1e-5));
    CHECK(r.advantages[2] == doctest::Approx(1.56893).epsilon(1e-5));
    CHECK(r.advantages[3] == 0.0);
}

TEST_CASE("advantages: groups under two trajectories are rejected") {
    CHECK_THROWS_WITH_AS(group_advantages({"p", {1.0}}, 1e-4), doctest::Contains("GroupTooSmall"),
                         Error);
    CHECK_THROWS_WITH_AS(group_advantages({"p", {}}, 1e-4), doctest::Contains("GroupTooSmall"),
                         Error);
}

TEST_CASE("advantages: normalization properties over random groups") {
    testutil::Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        RolloutGroup group{"p", {}};
        for (int i = 0; i < 8; ++i) group.rewards.push_back(rng.uniform());
        auto [_, sigma] = naive_mean_std(group.rewards);
        if (sigma < 1e-3) continue;
        AdvantageResult r = group_advantages(group, 1e-4);
        double mean_a = 0.0;
        for (double a : r.advantages) mean_a += a;
        mean_a /= 8.0;
        CHECK(std::fabs(mean_a) <= 1e-12);
        auto [__, std_a] = naive_mean_std(r.advantages);
        CHECK(std_a == doctest::Approx(sigma / (sigma + 1e-4)).epsilon(1e-9));
    }
}

TEST_CASE("advantages: shift leaves them unchanged (dyadic inputs, exact)") {
    const std::vector<double> base = {0.125, 0.25, 0.5, 0.375};
    AdvantageResult r0 = group_advantages({"p", base}, 1e-4);
    std::vector<double> shifted;
    for (double x : base) shifted.push_back(x + 0.25);
    AdvantageResult r1 = group_advantages({"p", shifted}, 1e-4);
    for (int i = 0; i < 4; ++i) CHECK(r0.advantages[i] == r1.advantages[i]);
}

TEST_CASE("advantages: positive scaling is invariant at epsilon = 0") {
    const std::vector<double> base = {0.125, 0.25, 0.5, 0.375};
    AdvantageResult r0 = group_advantages({"p", base}, 0.0);
    std::vector<double> scaled;
    for (double x : base) scaled.push_back(2.0 * x);
    AdvantageResult r1 = group_advantages({"p", scaled}, 0.0);
    for (int i = 0; i < 4; ++i) CHECK(r0.advantages[i] == doctest::Approx(r1.advantages[i]).epsilon(1e-15));
}

TEST_CASE("surrogate: single token at ratio 1") {
    TokenLogProbs lp{{-1.0}, {-1.0}, {-1.0}};
    CHECK(clipped_surrogate_loss({{lp, 2.0}}, 0.2) == -2.0);
}

TEST_CASE("surrogate: clipping truncates the upper branch") {
    // rho = 1.5 via current - old = ln 1.5; term = min(1.5, 1.2) * 1
    TokenLogProbs lp{{std::log(1.5) - 1.0}, {-1.0}, {-1.0}};
    CHECK(clipped_surrogate_loss({{lp, 1.0}}, 0.2) == doctest::Approx(-1.2).epsilon(1e-12));
    // negative advantage: min picks the unclipped branch
    CHECK(clipped_surrogate_loss({{lp, -1.0}}, 0.2) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("surrogate: normalized by total active tokens across the batch") {
    TokenLogProbs two{{-1.0, -2.0}, {-1.0, -2.0}, {-1.0, -2.0}};
    TokenLogProbs one{{-0.5}, {-0.5}, {-0.5}};
    // terms: 3, 3 (A=3) and 1 (A=1) over 3 tokens -> -(3+3+1)/3
    CHECK(clipped_surrogate_loss({{two, 3.0}, {one, 1.0}}, 0.2) ==
          doctest::Approx(-7.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("clip idempotence: ratios inside the window match the unclipped loss") {
    testutil::Rng rng(123);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::pair<TokenLogProbs, double>> batch;
        double unclipped_sum = 0.0;
        long tokens = 0;
        for (int traj = 0; traj < 3; ++traj) {
            TokenLogProbs lp;
            const double advantage = rng.uniform(-2.0, 2.0);
            for (int t = 0; t < 4; ++t) {
                const double old_lp = -rng.uniform(0.5, 3.0);
                const double delta = rng.uniform(-0.18, 0.18); // keeps rho in [1-.2, 1+.2]
                lp.old.push_back(old_lp);
                lp.current.push_back(old_lp + delta);
                lp.reference.push_back(old_lp);
                unclipped_sum += std::exp(delta) * advantage;
                ++tokens;
            }
            batch.emplace_back(lp, advantage);
        }
        const double expected = -unclipped_sum / static_cast<double>(tokens);
        CHECK(clipped_surrogate_loss(batch, 0.2) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("k3: closed form and the frozen ln-2 points") {
    CHECK(k3_kl(-1.0, -1.0) == 0.0);
    // d = ln 2: 2 - ln 2 - 1
    CHECK(k3_kl(-std::log(2.0) - 1.0, -1.0) == doctest::Approx(0.306853).epsilon(1e-5));
    // d = -ln 2: 0.5 + ln 2 - 1
    CHECK(k3_kl(-1.0, -std::log(2.0) - 1.0) == doctest::Approx(0.193147).epsilon(1e-5));
}

TEST_CASE("k3: non-negative over random pairs, zero only at equality") {
    testutil::Rng rng(77);
    for (int trial = 0; trial < 1000; ++trial) {
        const double cur = -rng.uniform(0.0, 8.0);
        const double ref = -rng.uniform(0.0, 8.0);
        const double v = k3_kl(cur, ref);
        CHECK(v >= 0.0);
        const double d = ref - cur;
        CHECK(v == doctest::Approx(std::exp(d) - d - 1.0).epsilon(1e-12));
        if (cur != ref) CHECK(v > 0.0);
    }
}

TEST_CASE("total loss: composition of the two pieces") {
    TokenLogProbs same{{-1.0}, {-1.0}, {-1.0}};
    LossReport zero_kl = total_loss({{same, 1.0}}, 0.2, 0.04);
    CHECK(zero_kl.kl_penalty == 0.0);
    CHECK(zero_kl.total_loss == zero_kl.pg_loss);

    // single token, rho = 1, A = 1, d = ln 2
    TokenLogProbs lp{{-std::log(2.0) - 1.0}, {-std::log(2.0) - 1.0}, {-1.0}};
    LossReport r = total_loss({{lp, 1.0}}, 0.2, 0.04);
    CHECK(r.pg_loss == -1.0);
    CHECK(r.total_loss == doctest::Approx(-1.0 + 0.04 * 0.306853).epsilon(1e-6));

    LossReport no_kl = total_loss({{lp, 1.0}}, 0.2, 0.0);
    CHECK(no_kl.total_loss == no_kl.pg_loss);
    CHECK(r.active_token_count == 1);
}

TEST_CASE("REINFORCE reduction: at current=old the gradient matches -A grad log pi") {
    // toy categorical policy: logits theta, pi = softmax(theta); trajectories
    // are token index lists; finite differences vs the analytic estimator
    testutil::Rng rng(2024);
    auto log_softmax = [](const std::vector<double>& theta, int idx) {
        double mx = theta[0];
        for (double v : theta) mx = std::max(mx, v);
        double z = 0.0;
        for (double v : theta) z += std::exp(v - mx);
        return theta[static_cast<std::size_t>(idx)] - mx - std::log(z);
    };

    for (int instance = 0; instance < 50; ++instance) {
        const int n = rng.uniform_int(3, 6);
        std::vector<double> theta;
        for (int j = 0; j < n; ++j) theta.push_back(rng.uniform(-1.0, 1.0));

        const int ntraj = rng.uniform_int(1, 3);
        std::vector<std::vector<int>> tokens(static_cast<std::size_t>(ntraj));
        std::vector<double> advantage(static_cast<std::size_t>(ntraj));
        long total_tokens = 0;
        for (int i = 0; i < ntraj; ++i) {
            const int len = rng.uniform_int(1, 5);
            for (int t = 0; t < len; ++t)
                tokens[static_cast<std::size_t>(i)].push_back(rng.uniform_int(0, n - 1));
            advantage[static_cast<std::size_t>(i)] =
                (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 2.0);
            total_tokens += len;
        }

        auto loss_at = [&](const std::vector<double>& th) {
            std::vector<std::pair<TokenLogProbs, double>> batch;
            for (int i = 0; i < ntraj; ++i) {
                TokenLogProbs lp;
                for (int tok : tokens[static_cast<std::size_t>(i)]) {
                    lp.current.push_back(log_softmax(th, tok));
                    lp.old.push_back(log_softmax(theta, tok)); // old pinned at theta
                    lp.reference.push_back(lp.old.back());
                }
                batch.emplace_back(lp, advantage[static_cast<std::size_t>(i)]);
            }
            return clipped_surrogate_loss(batch, 0.2);
        };

        // analytic: -(1/T) sum_i A_i sum_t (1[j = y_t] - pi_j)
        std::vector<double> pi;
        {
            double mx = theta[0];
            for (double v : theta) mx = std::max(mx, v);
            double z = 0.0;
            for (double v : theta) z += std::exp(v - mx);
            for (double v : theta) pi.push_back(std::exp(v - mx) / z);
        }
        std::vector<double> analytic(static_cast<std::size_t>(n), 0.0);
        for (int i = 0; i < ntraj; ++i)
            for (int tok : tokens[static_cast<std::size_t>(i)])
                for (int j = 0; j < n; ++j)
                    analytic[static_cast<std::size_t>(j)] -=
                        advantage[static_cast<std::size_t>(i)] *
                        ((j == tok ? 1.0 : 0.0) - pi[static_cast<std::size_t>(j)]) /
                        static_cast<double>(total_tokens);

        const double h = 1e-5;
        double err_sq = 0.0, norm_sq = 0.0;
        for (int j = 0; j < n; ++j) {
            std::vector<double> up = theta, down = theta;
            up[static_cast<std::size_t>(j)] += h;
            down[static_cast<std::size_t>(j)] -= h;
            const double fd = (loss_at(up) - loss_at(down)) / (2.0 * h);
            const double diff = fd - analytic[static_cast<std::size_t>(j)];
            err_sq += diff * diff;
            norm_sq += analytic[static_cast<std::size_t>(j)] * analytic[static_cast<std::size_t>(j)];
        }
        CHECK(std::sqrt(err_sq) <= 1e-4 * std::max(std::sqrt(norm_sq), 1e-8));
    }
}

TEST_CASE("ewma: constants, the two-point recurrence, and convergence") {
    SmoothedCurve flat = ewma_curve(std::vector<double>(20, 0.7), 0.01, 5);
    for (double s : flat.smoothed) CHECK(s == doctest::Approx(0.7).epsilon(1e-15));
    for (double s : flat.rolling_std) CHECK(s == doctest::Approx(0.0).epsilon(1e-12));

    SmoothedCurve pair = ewma_curve({0.0, 1.0}, 0.5, 50);
    CHECK(pair.smoothed[0] == 0.0);
    CHECK(pair.smoothed[1] == 0.5);

    std::vector<double> step(40, 0.0);
    for (int i = 20; i < 40; ++i) step[static_cast<std::size_t>(i)] = 1.0;
    SmoothedCurve sc = ewma_curve(step, 0.2, 10);
    for (int i = 21; i < 40; ++i)
        CHECK(sc.smoothed[static_cast<std::size_t>(i)] >
              sc.smoothed[static_cast<std::size_t>(i - 1)]);
    CHECK(sc.smoothed.back() < 1.0);
    CHECK(sc.smoothed.back() > 0.95);

    // rolling std over the trailing window only
    SmoothedCurve win = ewma_curve({1.0, 1.0, 1.0, 5.0, 5.0, 5.0, 5.0}, 0.1, 3);
    CHECK(win.rolling_std.back() == 0.0); // last three are constant
}

TEST_CASE("ewma input validation") {
    CHECK_THROWS_WITH_AS(ewma_curve({}, 0.1, 5), doctest::Contains("EmptySeries"), Error);
    CHECK_THROWS_WITH_AS(ewma_curve({1.0}, 0.0, 5), doctest::Contains("BadSmoothingConstant"),
                         Error);
    CHECK_THROWS_WITH_AS(ewma_curve({1.0}, 0.1, 0), doctest::Contains("BadWindow"), Error);
}
