#include "irl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace irl {

NllValue metric_nll(const StochasticPolicy& policy, const Dataset& data) {
    const LogLikelihood ll = log_likelihood(policy, data, 1.0);
    if (ll.zero_probability) return {std::numeric_limits<double>::infinity(), true};
    return {-ll.value, false};
}

double expected_value(const TabularMDP& mdp, const MatrixXd& reward, const StochasticPolicy& policy,
                      const SolverOptions& options) {
    return mdp.initial_dist().dot(policy_evaluation(mdp, reward, policy, options));
}

StochasticPolicy optimal_policy(const TabularMDP& mdp, const MatrixXd& reward, const SolverOptions& options) {
    return StochasticPolicy::deterministic(greedy_actions(value_iteration(mdp, reward, options)), mdp.n_actions());
}

double metric_evd(const TabularMDP& mdp, const MatrixXd& true_reward, const MatrixXd& recovered_reward,
                  const SolverOptions& options) {
    const double best = expected_value(mdp, true_reward, optimal_policy(mdp, true_reward, options), options);
    return best - expected_value(mdp, true_reward, optimal_policy(mdp, recovered_reward, options), options);
}

double metric_stochastic_evd(const TabularMDP& mdp, const MatrixXd& true_reward, const StochasticPolicy& policy,
                             const SolverOptions& options) {
    const double best = expected_value(mdp, true_reward, optimal_policy(mdp, true_reward, options), options);
    return best - expected_value(mdp, true_reward, policy, options);
}

double value_range(const TabularMDP& mdp, const MatrixXd& true_reward, const SolverOptions& options) {
    const VectorXd v = policy_evaluation(mdp, true_reward, optimal_policy(mdp, true_reward, options), options);
    return v.maxCoeff() - v.minCoeff();
}

namespace {

// C(s, a, s') = R(s,a) + discount * Rbar(s') - Rbar(s) - discount * mean(Rbar),
// where Rbar averages over actions (the coverage's action marginal is uniform).
MatrixXd canonical_parts(const MatrixXd& r, double discount, VectorXd& next_term) {
    const VectorXd rbar = r.rowwise().mean();
    const double rbarbar = rbar.mean();
    next_term = discount * rbar;
    MatrixXd base = r;
    base.colwise() -= rbar;
    base.array() -= discount * rbarbar;
    return base;
}

}  // namespace

EpicValue metric_epic(const TabularMDP& mdp, const MatrixXd& reward_a, const MatrixXd& reward_b) {
    const int ns = mdp.n_states();
    const int na = mdp.n_actions();
    for (const MatrixXd* r : {&reward_a, &reward_b})
        if (r->rows() != ns || r->cols() != na) throw std::invalid_argument("metric_epic: reward shape mismatch");

    VectorXd next_a, next_b;
    const MatrixXd base_a = canonical_parts(reward_a, mdp.discount(), next_a);
    const MatrixXd base_b = canonical_parts(reward_b, mdp.discount(), next_b);
    const double w0 = 1.0 / (static_cast<double>(ns) * na);

    // Weighted first and second moments over (s, a, s').
    double ma = 0, mb = 0;
    for (int a = 0; a < na; ++a) {
        const MatrixXd& t = mdp.transition(a);
        const VectorXd ea = t * next_a;
        const VectorXd eb = t * next_b;
        ma += w0 * (base_a.col(a) + ea).sum();
        mb += w0 * (base_b.col(a) + eb).sum();
    }
    double vaa = 0, vbb = 0;
    for (int a = 0; a < na; ++a) {
        const MatrixXd& t = mdp.transition(a);
        for (int s = 0; s < ns; ++s) {
            const double ba = base_a(s, a) - ma;
            const double bb = base_b(s, a) - mb;
            for (int n = 0; n < ns; ++n) {
                const double p = t(s, n);
                if (p == 0.0) continue;
                const double ca = ba + next_a[n];
                const double cb = bb + next_b[n];
                vaa += w0 * p * ca * ca;
                vbb += w0 * p * cb * cb;
            }
        }
    }
    constexpr double kZeroVar = 1e-24;
    const bool zero_a = vaa <= kZeroVar;
    const bool zero_b = vbb <= kZeroVar;
    if (zero_a || zero_b) return {zero_a && zero_b ? 0.0 : 1.0, true};
    // sqrt((1 - rho) / 2) equals half the distance between the standardized
    // rewards; evaluating it that way keeps near-identical rewards at ~1e-16.
    const double sa = std::sqrt(vaa);
    const double sb = std::sqrt(vbb);
    double diff = 0;
    for (int a = 0; a < na; ++a) {
        const MatrixXd& t = mdp.transition(a);
        for (int s = 0; s < ns; ++s)
            for (int n = 0; n < ns; ++n) {
                const double p = t(s, n);
                if (p == 0.0) continue;
                const double d = (base_a(s, a) - ma + next_a[n]) / sa - (base_b(s, a) - mb + next_b[n]) / sb;
                diff += w0 * p * d * d;
            }
    }
    return {std::clamp(std::sqrt(diff) / 2.0, 0.0, 1.0), false};
}

}  // namespace irl
