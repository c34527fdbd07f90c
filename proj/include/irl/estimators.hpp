#pragma once

#include "irl/mdp.hpp"
#include "irl/reward.hpp"
#include "irl/solvers.hpp"

#include <array>
#include <chrono>
#include <string>
#include <vector>

namespace irl {

/// Nonparametric expert policy estimate pi_hat_E.
struct ExpertEstimate {
    StochasticPolicy policy;
    MatrixXd visit_counts;
    std::vector<bool> visited;
    /// Optional trajectory statistics, empty unless filled by
    /// attach_trajectory_counts: per-trajectory mean of
    /// discount^t 1[s_t = s, a_t = a], and the empirical start distribution.
    MatrixXd discounted_visits;
    VectorXd start_dist;
};

/// pi_hat(a|s) = (N[s][a] + smoothing) / (sum_a N[s][a] + smoothing * |A|) on
/// visited states; uniform elsewhere.
ExpertEstimate estimate_expert_policy(const Dataset& data, int n_states, int n_actions,
                                      double smoothing = 0.0);

/// W(s, a) = (1 / |trajectories|) sum_traj sum_t discount^t 1[s_t = s, a_t = a].
MatrixXd discounted_visitation(const Dataset& data, int n_states, int n_actions, double discount);

/// Fills the trajectory statistics used by ExpertCounts::empirical.
void attach_trajectory_counts(ExpertEstimate& estimate, const Dataset& data, double discount);

/// E^pi(s, i) = sum_a pi(a|s) D[s][a][i].
MatrixXd expected_reward_gradient(const StochasticPolicy& policy, const RewardGradientTensor& grad);

/// mu = sum_s' Occ(s') E_{a'~pi}[dr(s',a')/dtheta].
VectorXd expert_feature_gradient(const OccupancyTables& occ, const StochasticPolicy& pi_hat,
                                 const RewardGradientTensor& grad);

/// dQ^pi/dtheta for every action: D_a + discount * Occ_a E^pi. Each entry is
/// n_states x n_params.
std::vector<MatrixXd> value_gradient(const OccupancyTables& cond_occ, const StochasticPolicy& pi_tilde,
                                     const RewardGradientTensor& grad);

/// sum_s w(s) sum_a pi_hat(a|s) log pi(a|s), skipping pi_hat(a|s) = 0 terms.
double weighted_log_likelihood(const VectorXd& state_weight, const StochasticPolicy& pi_hat,
                               const StochasticPolicy& policy);

enum class EstimationMethod { optimization, approximation };

/// Source of the expert reward-gradient counts in the optimization method:
/// occupancy of pi_hat_E under the model, or discounted counts along the
/// demonstrated trajectories. Empirical counts are matched against the
/// learner's occupancy from the demonstrations' start distribution.
enum class ExpertCounts { occupancy, empirical };

std::string to_string(ExpertCounts counts);
ExpertCounts expert_counts_from_string(const std::string& name);

std::string to_string(EstimationMethod method);
EstimationMethod estimation_method_from_string(const std::string& name);

struct ConvergenceConfig {
    /// Gradient sup-norm threshold.
    double threshold = 1e-6;
    /// Iterations in a row the threshold must hold (10 for MLP rewards).
    int consecutive = 1;
    /// Cap on reward updates per inner loop; hitting it ends the loop unconverged.
    long max_iterations = 20000;
};

struct EstimationConfig {
    EstimationMethod method = EstimationMethod::optimization;
    /// Outer policy updates for the approximation method. K = 1 is CCP.
    int outer_iterations = 1;
    StepConfig step;
    ConvergenceConfig convergence;
    SolverOptions solver;
    double smoothing = 0.0;
    /// Optimization method only. `empirical` needs ExpertEstimate::discounted_visits.
    ExpertCounts expert_counts = ExpertCounts::occupancy;
    /// Start each value iteration from the previous Q*.
    bool warm_start_value = false;

    static EstimationConfig defaults_for(EstimationMethod method, RewardKind kind);
};

enum class Phase { precompute, outer_dp, inner_value, inner_grad, inner_step };
inline constexpr std::array<Phase, 5> kPhases{Phase::precompute, Phase::outer_dp, Phase::inner_value,
                                              Phase::inner_grad, Phase::inner_step};
std::string to_string(Phase phase);

/// Computation class of a timed operation.
enum class OpKind { dp, matmul };

/**
 * Per-phase wall-clock totals and operation counts. Inner-loop per-step
 * averages exclude the first (warm-up) reward update.
 */
struct TimingBreakdown {
    std::array<double, 5> seconds{};
    std::array<long, 5> dp_ops{};
    std::array<long, 5> matmul_ops{};
    long inner_steps = 0;
    double warmup_inner_seconds = 0.0;
    double total_seconds = 0.0;

    double phase_seconds(Phase p) const { return seconds[static_cast<std::size_t>(p)]; }
    long phase_dp_ops(Phase p) const { return dp_ops[static_cast<std::size_t>(p)]; }
    double inner_total() const;
    /// Mean seconds per reward update, excluding the warm-up step.
    double inner_step_average() const;
    /// DP-tagged operations executed inside the reward-update loop.
    long inner_dp_ops() const;
};

struct TraceEntry {
    int outer = 0;
    long iteration = 0;
    double grad_norm = 0.0;
    double objective = 0.0;
    double seconds = 0.0;
};

struct EstimationResult {
    RewardModel model;
    StochasticPolicy policy;
    std::vector<TraceEntry> trace;
    TimingBreakdown timing;
    bool converged = false;
    /// Parameters at the end of each outer iteration (one entry for Alg. 1 runs).
    std::vector<VectorXd> outer_params;
    /// Policy pi_tilde at the end of each outer iteration (approximation only).
    std::vector<StochasticPolicy> outer_policies;

    const VectorXd& theta() const { return model.params(); }
};

/// Soft-optimal estimator: every reward update solves for Q* and the state
/// occupancy of softmax Q*.
EstimationResult run_optimization_based(const TabularMDP& mdp, const FeatureMap& features,
                                        const RewardModel& reward_init, const ExpertEstimate& expert,
                                        EstimationConfig config);
EstimationResult run_optimization_based(const TabularMDP& mdp, const FeatureMap& features,
                                        const RewardModel& reward_init, const Dataset& data,
                                        EstimationConfig config);

/// Policy-improvement estimator: soft values under a fixed pi_tilde, refreshed
/// K times. The first pi_tilde is the expert estimate.
EstimationResult run_approximation_based(const TabularMDP& mdp, const FeatureMap& features,
                                         const RewardModel& reward_init, const ExpertEstimate& expert,
                                         EstimationConfig config);
EstimationResult run_approximation_based(const TabularMDP& mdp, const FeatureMap& features,
                                         const RewardModel& reward_init, const Dataset& data,
                                         EstimationConfig config);

/// Dispatches on config.method.
EstimationResult estimate(const TabularMDP& mdp, const FeatureMap& features,
                          const RewardModel& reward_init, const ExpertEstimate& expert,
                          const EstimationConfig& config);

/// Objective g(theta) with pi_theta = softmax Q*_theta.
double optimization_objective(const TabularMDP& mdp, const FeatureMap& features,
                              const RewardModel& model, const ExpertEstimate& expert,
                              const SolverOptions& options = {});
/// Objective g(theta) with pi_theta = softmax Q^{pi_tilde}_theta.
double approximation_objective(const TabularMDP& mdp, const FeatureMap& features,
                               const RewardModel& model, const ExpertEstimate& expert,
                               const StochasticPolicy& pi_tilde, const SolverOptions& options = {});
/// Gradient assembled as in the optimization loop: mu^E - mu^{pi_theta}.
VectorXd optimization_gradient(const TabularMDP& mdp, const FeatureMap& features,
                               const RewardModel& model, const ExpertEstimate& expert,
                               const SolverOptions& options = {});
/// Gradient assembled as in the approximation inner loop.
VectorXd approximation_gradient(const TabularMDP& mdp, const FeatureMap& features,
                                const RewardModel& model, const ExpertEstimate& expert,
                                const StochasticPolicy& pi_tilde, const SolverOptions& options = {});

struct GradientEquivalenceReport {
    VectorXd general_form;
    VectorXd feature_difference;
    double max_abs_discrepancy = 0.0;
};

/// Evaluates the likelihood gradient two ways at pi_tilde = pi_theta: the
/// general soft-value form, and the feature-count difference. Linear rewards only.
GradientEquivalenceReport gradient_equivalence_check(const TabularMDP& mdp, const FeatureMap& features,
                                                     const VectorXd& theta, const ExpertEstimate& expert,
                                                     const SolverOptions& options = {});
GradientEquivalenceReport gradient_equivalence_check(const TabularMDP& mdp, const FeatureMap& features,
                                                     const VectorXd& theta, const Dataset& data,
                                                     const SolverOptions& options = {});

}  // namespace irl
