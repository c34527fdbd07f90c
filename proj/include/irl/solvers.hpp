#pragma once

#include "irl/mdp.hpp"

#include <optional>
#include <vector>

namespace irl {

struct SolverOptions {
    /// Sup-norm Bellman residual at which value iteration stops.
    double tol = 1e-10;
    long max_iters = 100000;
    /// Above this many states, linear solves switch from dense LU to
    /// fixed-point (Jacobi) iteration.
    int dense_state_limit = 3000;
    /// Optional starting Q for value iteration.
    const MatrixXd* warm_start = nullptr;
};

/**
 * Soft Q-values. `under_policy` is the policy the table was evaluated under;
 * it is empty for the optimal soft value.
 */
struct SoftValueTable {
    MatrixXd q;
    std::optional<StochasticPolicy> under_policy;
    double discount = 0.0;
    long iterations = 0;
    double residual = 0.0;
};

/**
 * Discounted visitation. `cond_occ[a](s, s')` is Occ(s'|s,a), the discounted
 * visitation of s' at times t >= 1 after a forced first step (s, a), with
 * weight discount^(t-1). `state_occ` is the visitation from the initial
 * distribution, sum_t discount^t P(s_t = s').
 */
struct OccupancyTables {
    VectorXd state_occ;
    std::vector<MatrixXd> cond_occ;
    double discount = 0.0;
};

/// Row-wise log-sum-exp, computed with max subtraction.
VectorXd log_sum_exp_rows(const MatrixXd& q);

/// Optimal soft Q via Q <- r + discount * E_{s'}[log sum_a' exp Q(s', a')].
/// Throws ConvergenceError if the residual is still above tol after max_iters.
SoftValueTable soft_value_iteration(const TabularMDP& mdp, const MatrixXd& reward,
                                    const SolverOptions& options = {});

/// L(s) = sum_a pi(a|s) (r(s,a) - log pi(a|s)), with 0 log 0 = 0.
VectorXd expected_reward_entropy(const MatrixXd& reward, const StochasticPolicy& policy);

/// Q = r + discount * Occ(.|s,a) L, using precomputed conditional occupancy of `policy`.
MatrixXd soft_value_from_occupancy(const OccupancyTables& occ, const MatrixXd& reward,
                                   const StochasticPolicy& policy);

/// Soft value of a fixed policy (entropy-regularized policy evaluation).
SoftValueTable soft_policy_evaluation(const TabularMDP& mdp, const MatrixXd& reward,
                                      const StochasticPolicy& policy,
                                      const SolverOptions& options = {});

OccupancyTables occupancy_state(const TabularMDP& mdp, const StochasticPolicy& policy,
                                const SolverOptions& options = {});
OccupancyTables occupancy_conditional(const TabularMDP& mdp, const StochasticPolicy& policy,
                                      const SolverOptions& options = {});

// Standard (unregularized) counterparts used by the value-difference metrics.

/// Optimal hard Q by value iteration.
MatrixXd value_iteration(const TabularMDP& mdp, const MatrixXd& reward,
                         const SolverOptions& options = {});
/// Greedy policy; ties go to the lowest action index.
std::vector<int> greedy_actions(const MatrixXd& q);
/// State values of `policy` under `reward`, V = sum_t discount^t E[r].
VectorXd policy_evaluation(const TabularMDP& mdp, const MatrixXd& reward,
                           const StochasticPolicy& policy, const SolverOptions& options = {});

}  // namespace irl
