#pragma once

#include "irl/mdp.hpp"
#include "irl/solvers.hpp"

namespace irl {

struct NllValue {
    double value = 0.0;
    /// An observed action had zero probability; value is +inf.
    bool zero_probability = false;
};

/// Negative mean per-trajectory log likelihood, undiscounted.
NllValue metric_nll(const StochasticPolicy& policy, const Dataset& data);

/// P_s . V^pi under `reward`, with standard (unregularized) values.
double expected_value(const TabularMDP& mdp, const MatrixXd& reward, const StochasticPolicy& policy,
                      const SolverOptions& options = {});

/// Hard-optimal deterministic policy for `reward`, ties to the lowest action.
StochasticPolicy optimal_policy(const TabularMDP& mdp, const MatrixXd& reward,
                                const SolverOptions& options = {});

/// Value of the true-optimal policy minus the value of the policy that is
/// optimal for the recovered reward, both under the true reward.
double metric_evd(const TabularMDP& mdp, const MatrixXd& true_reward, const MatrixXd& recovered_reward,
                  const SolverOptions& options = {});

/// As metric_evd, with the estimator's stochastic policy as the second policy.
double metric_stochastic_evd(const TabularMDP& mdp, const MatrixXd& true_reward, const StochasticPolicy& policy,
                             const SolverOptions& options = {});

/// max_s V*(s) - min_s V*(s) for the true-reward optimal policy.
double value_range(const TabularMDP& mdp, const MatrixXd& true_reward, const SolverOptions& options = {});

struct EpicValue {
    double distance = 0.0;
    /// One of the canonicalized rewards had zero variance.
    bool degenerate = false;
};

/**
 * Pearson distance between canonically shaped rewards. Coverage is uniform
 * over (s, a) with s' drawn from T(.|s,a), enumerated exactly.
 */
EpicValue metric_epic(const TabularMDP& mdp, const MatrixXd& reward_a, const MatrixXd& reward_b);

struct MetricReport {
    double nll = 0.0;
    bool nll_zero_probability = false;
    double evd = 0.0;
    double stochastic_evd = 0.0;
    double epic = 0.0;
    bool epic_degenerate = false;
    bool nll_in_sample = false;
};

}  // namespace irl
