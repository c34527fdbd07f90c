#include "irl/metrics.hpp"
#include "irl/solvers.hpp"
#include "random_instances.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace irl;
using irl::testing::random_matrix;
using irl::testing::random_mdp;
using irl::testing::random_policy;

namespace {

VectorXd evaluate(const TabularMDP& mdp, const MatrixXd& r, const StochasticPolicy& pi) {
    const int ns = mdp.n_states();
    MatrixXd p = MatrixXd::Zero(ns, ns);
    VectorXd rp = VectorXd::Zero(ns);
    for (int s = 0; s < ns; ++s)
        for (int a = 0; a < mdp.n_actions(); ++a) {
            p.row(s) += pi(s, a) * mdp.transition(a).row(s);
            rp[s] += pi(s, a) * r(s, a);
        }
    return (MatrixXd::Identity(ns, ns) - mdp.discount() * p).fullPivLu().solve(rp);
}

// Best initial-weighted value over every deterministic policy.
double exhaustive_best(const TabularMDP& mdp, const MatrixXd& r) {
    const int ns = mdp.n_states(), na = mdp.n_actions();
    std::vector<int> acts(ns, 0);
    double best = -INFINITY;
    while (true) {
        best = std::max(best, mdp.initial_dist().dot(evaluate(mdp, r, StochasticPolicy::deterministic(acts, na))));
        int i = 0;
        while (i < ns && ++acts[i] == na) acts[i++] = 0;
        if (i == ns) break;
    }
    return best;
}

std::vector<int> greedy_by_sweeps(const TabularMDP& mdp, const MatrixXd& r) {
    MatrixXd q = r;
    for (int k = 0; k < 3000; ++k) {
        const VectorXd v = q.rowwise().maxCoeff();
        for (int a = 0; a < mdp.n_actions(); ++a) q.col(a) = r.col(a) + mdp.discount() * mdp.transition(a) * v;
    }
    return greedy_actions(q);
}

// Pearson-correlation EPIC written directly from the definition.
double epic_reference(const TabularMDP& mdp, const MatrixXd& ra, const MatrixXd& rb) {
    const int ns = mdp.n_states(), na = mdp.n_actions();
    const double g = mdp.discount();
    auto canonical = [&](const MatrixXd& r) {
        // E over A ~ uniform, S' ~ T(.|s, A) of R(s, A) (state-action reward ignores s').
        VectorXd e_from = r.rowwise().mean();
        const double e_all = e_from.mean();
        std::vector<double> out;
        for (int s = 0; s < ns; ++s)
            for (int a = 0; a < na; ++a)
                for (int n = 0; n < ns; ++n) out.push_back(r(s, a) + g * e_from[n] - e_from[s] - g * e_all);
        return out;
    };
    std::vector<double> w;
    for (int s = 0; s < ns; ++s)
        for (int a = 0; a < na; ++a)
            for (int n = 0; n < ns; ++n) w.push_back(mdp.prob(s, a, n) / (ns * na));
    const auto ca = canonical(ra), cb = canonical(rb);
    long double ma = 0, mb = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        ma += w[i] * ca[i];
        mb += w[i] * cb[i];
    }
    long double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        cov += w[i] * (ca[i] - ma) * (cb[i] - mb);
        va += w[i] * (ca[i] - ma) * (ca[i] - ma);
        vb += w[i] * (cb[i] - mb) * (cb[i] - mb);
    }
    const double rho = static_cast<double>(cov / std::sqrt(va * vb));
    return std::sqrt(std::max(0.0, (1.0 - rho) / 2.0));
}

}  // namespace

TEST(Nll, UniformPolicy) {
    Dataset d;
    for (int i = 0; i < 3; ++i) d.trajectories.push_back({{{0, 0}, {1, 1}, {0, 1}, {1, 0}}, std::nullopt});
    const auto nll = metric_nll(StochasticPolicy::uniform(2, 2), d);
    EXPECT_NEAR(nll.value, 4.0 * std::log(2.0), 1e-14);
    EXPECT_FALSE(nll.zero_probability);
}

TEST(Nll, DeterministicMatchIsZeroAndMismatchIsInfinite) {
    Dataset d;
    d.trajectories.push_back({{{0, 1}, {1, 0}}, std::nullopt});
    EXPECT_EQ(metric_nll(StochasticPolicy::deterministic({1, 0}, 2), d).value, 0.0);
    const auto bad = metric_nll(StochasticPolicy::deterministic({0, 0}, 2), d);
    EXPECT_TRUE(bad.zero_probability);
    EXPECT_TRUE(std::isinf(bad.value) && bad.value > 0);
}

TEST(Nll, ConsistentWithLogLikelihood) {
    std::mt19937_64 rng(1);
    const auto mdp = random_mdp(5, 3, 0.9, rng);
    const auto pi = random_policy(5, 3, rng);
    Dataset d;
    for (int i = 0; i < 6; ++i) d.trajectories.push_back(sample_trajectory(mdp, pi, 15, i));
    EXPECT_DOUBLE_EQ(metric_nll(pi, d).value, -log_likelihood(pi, d, 1.0).value);
}

TEST(Evd, IdenticalAndScaledRewardsGiveZero) {
    std::mt19937_64 rng(2);
    const auto mdp = random_mdp(6, 3, 0.9, rng);
    const MatrixXd r = random_matrix(6, 3, rng);
    EXPECT_EQ(metric_evd(mdp, r, r), 0.0);
    EXPECT_NEAR(metric_evd(mdp, r, 2.0 * r), 0.0, 1e-12);
}

TEST(Evd, MatchesExhaustiveOracle) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const auto mdp = random_mdp(6, 3, 0.9, rng);
        const MatrixXd r = random_matrix(6, 3, rng);
        const MatrixXd other = random_matrix(6, 3, rng);
        const double best = exhaustive_best(mdp, r);
        const auto pi2 = StochasticPolicy::deterministic(greedy_by_sweeps(mdp, other), 3);
        const double want = best - mdp.initial_dist().dot(evaluate(mdp, r, pi2));
        EXPECT_NEAR(metric_evd(mdp, r, other), want, 1e-8);
        const auto pi = random_policy(6, 3, rng);
        EXPECT_NEAR(metric_stochastic_evd(mdp, r, pi), best - mdp.initial_dist().dot(evaluate(mdp, r, pi)), 1e-8);
    }
}

TEST(StochasticEvd, OptimalPolicyIsExactlyZero) {
    std::mt19937_64 rng(4);
    const auto mdp = random_mdp(5, 2, 0.9, rng);
    const MatrixXd r = random_matrix(5, 2, rng);
    EXPECT_EQ(metric_stochastic_evd(mdp, r, optimal_policy(mdp, r)), 0.0);
}

TEST(StochasticEvd, SingleStateEqualRewards) {
    const TabularMDP mdp({MatrixXd::Identity(1, 1), MatrixXd::Identity(1, 1)}, VectorXd::Ones(1), 0.9);
    EXPECT_NEAR(metric_stochastic_evd(mdp, MatrixXd::Constant(1, 2, 0.4), StochasticPolicy::uniform(1, 2)), 0.0,
                1e-12);
}

TEST(Evd, NonNegativeOnRandomInstances) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const auto mdp = random_mdp(5, 3, 0.9, rng);
        const MatrixXd r = random_matrix(5, 3, rng);
        EXPECT_GE(metric_evd(mdp, r, random_matrix(5, 3, rng)), -1e-9);
        EXPECT_GE(metric_stochastic_evd(mdp, r, random_policy(5, 3, rng)), -1e-9);
    }
}

TEST(ValueRange, SpreadOfOptimalValues) {
    const MatrixXd t = (MatrixXd(2, 2) << 1, 0, 0, 1).finished();
    const TabularMDP mdp({t}, VectorXd::Constant(2, 0.5), 0.5);
    EXPECT_NEAR(value_range(mdp, (MatrixXd(2, 1) << 1, 0).finished()), 2.0, 1e-12);
}

TEST(Epic, AffineInvarianceAndNegation) {
    std::mt19937_64 rng(6);
    const auto mdp = random_mdp(6, 3, 0.9, rng);
    const MatrixXd r = random_matrix(6, 3, rng);
    EXPECT_NEAR(metric_epic(mdp, r, r).distance, 0.0, 1e-9);
    EXPECT_NEAR(metric_epic(mdp, r, 3.0 * r.array() + 0.7).distance, 0.0, 1e-9);
    EXPECT_NEAR(metric_epic(mdp, r, -r).distance, 1.0, 1e-9);
}

TEST(Epic, MatchesPearsonDefinition) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const auto mdp = random_mdp(5, 3, 0.8, rng);
        const MatrixXd a = random_matrix(5, 3, rng), b = random_matrix(5, 3, rng);
        const auto e = metric_epic(mdp, a, b);
        EXPECT_NEAR(e.distance, epic_reference(mdp, a, b), 1e-10);
        EXPECT_FALSE(e.degenerate);
    }
}

TEST(Epic, SymmetricAndBounded) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const auto mdp = random_mdp(4, 2, 0.9, rng);
        const MatrixXd a = random_matrix(4, 2, rng), b = random_matrix(4, 2, rng);
        const double ab = metric_epic(mdp, a, b).distance;
        EXPECT_NEAR(ab, metric_epic(mdp, b, a).distance, 1e-12);
        EXPECT_GE(ab, 0.0);
        EXPECT_LE(ab, 1.0 + 1e-12);
    }
}

TEST(Epic, DegenerateConstantRewards) {
    std::mt19937_64 rng(10);
    const auto mdp = random_mdp(4, 2, 0.9, rng);
    const MatrixXd c = MatrixXd::Constant(4, 2, 2.0);
    const auto both = metric_epic(mdp, c, MatrixXd::Zero(4, 2));
    EXPECT_TRUE(both.degenerate);
    EXPECT_EQ(both.distance, 0.0);
    const auto one = metric_epic(mdp, c, random_matrix(4, 2, rng));
    EXPECT_TRUE(one.degenerate);
    EXPECT_EQ(one.distance, 1.0);
}
