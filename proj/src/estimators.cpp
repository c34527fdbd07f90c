#include "irl/estimators.hpp"

#include "irl/errors.hpp"

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace irl {

ExpertEstimate estimate_expert_policy(const Dataset& data, int n_states, int n_actions, double smoothing) {
    if (data.trajectories.empty() || data.total_steps() == 0)
        throw std::invalid_argument("estimate_expert_policy: empty dataset");
    if (smoothing < 0.0) throw std::invalid_argument("estimate_expert_policy: smoothing must be >= 0");

    MatrixXd counts = MatrixXd::Zero(n_states, n_actions);
    for (const auto& traj : data.trajectories)
        for (const auto& [s, a] : traj.steps) {
            if (s < 0 || s >= n_states || a < 0 || a >= n_actions)
                throw std::invalid_argument("estimate_expert_policy: step index out of range");
            counts(s, a) += 1.0;
        }

    MatrixXd probs(n_states, n_actions);
    std::vector<bool> visited(static_cast<std::size_t>(n_states), false);
    for (int s = 0; s < n_states; ++s) {
        const double total = counts.row(s).sum();
        if (total > 0.0) {
            visited[static_cast<std::size_t>(s)] = true;
            probs.row(s) = (counts.row(s).array() + smoothing) / (total + smoothing * n_actions);
        } else {
            probs.row(s).setConstant(1.0 / n_actions);
        }
    }
    return {StochasticPolicy(std::move(probs)), std::move(counts), std::move(visited), {}, {}};
}

MatrixXd discounted_visitation(const Dataset& data, int n_states, int n_actions, double discount) {
    if (data.trajectories.empty()) throw std::invalid_argument("discounted_visitation: empty dataset");
    MatrixXd w = MatrixXd::Zero(n_states, n_actions);
    for (const auto& traj : data.trajectories) {
        double weight = 1.0;
        for (const auto& [s, a] : traj.steps) {
            if (s < 0 || s >= n_states || a < 0 || a >= n_actions)
                throw std::invalid_argument("discounted_visitation: step index out of range");
            w(s, a) += weight;
            weight *= discount;
        }
    }
    return w / static_cast<double>(data.trajectories.size());
}

void attach_trajectory_counts(ExpertEstimate& estimate, const Dataset& data, double discount) {
    const int ns = estimate.policy.n_states();
    estimate.discounted_visits = discounted_visitation(data, ns, estimate.policy.n_actions(), discount);
    VectorXd start = VectorXd::Zero(ns);
    for (const auto& traj : data.trajectories)
        if (!traj.steps.empty()) start[traj.steps.front().state] += 1.0;
    if (start.sum() == 0.0) throw std::invalid_argument("attach_trajectory_counts: all trajectories are empty");
    estimate.start_dist = start / start.sum();
}

MatrixXd expected_reward_gradient(const StochasticPolicy& policy, const RewardGradientTensor& grad) {
    if (policy.n_states() != grad.n_states || policy.n_actions() != grad.n_actions)
        throw std::invalid_argument("expected_reward_gradient: dimension mismatch");
    MatrixXd out = MatrixXd::Zero(grad.n_states, grad.n_params());
    for (int a = 0; a < grad.n_actions; ++a)
        out.noalias() += policy.probs().col(a).asDiagonal() * grad.action_block(a);
    return out;
}

VectorXd expert_feature_gradient(const OccupancyTables& occ, const StochasticPolicy& pi_hat,
                                 const RewardGradientTensor& grad) {
    if (occ.state_occ.size() != grad.n_states)
        throw std::invalid_argument("expert_feature_gradient: occupancy size mismatch");
    return expected_reward_gradient(pi_hat, grad).transpose() * occ.state_occ;
}

std::vector<MatrixXd> value_gradient(const OccupancyTables& cond_occ, const StochasticPolicy& pi_tilde,
                                     const RewardGradientTensor& grad) {
    if (cond_occ.cond_occ.size() != static_cast<std::size_t>(grad.n_actions))
        throw std::invalid_argument("value_gradient: missing conditional occupancy");
    const MatrixXd e = expected_reward_gradient(pi_tilde, grad);
    std::vector<MatrixXd> out;
    out.reserve(static_cast<std::size_t>(grad.n_actions));
    for (int a = 0; a < grad.n_actions; ++a)
        out.push_back(grad.action_block(a) +
                      cond_occ.discount * (cond_occ.cond_occ[static_cast<std::size_t>(a)] * e));
    return out;
}

double weighted_log_likelihood(const VectorXd& state_weight, const StochasticPolicy& pi_hat,
                               const StochasticPolicy& policy) {
    double total = 0.0;
    for (int s = 0; s < pi_hat.n_states(); ++s) {
        if (state_weight[s] == 0.0) continue;
        double inner = 0.0;
        for (int a = 0; a < pi_hat.n_actions(); ++a)
            if (pi_hat(s, a) > 0.0) inner += pi_hat(s, a) * std::log(policy(s, a));
        total += state_weight[s] * inner;
    }
    return total;
}

std::string to_string(EstimationMethod method) {
    return method == EstimationMethod::optimization ? "optimization" : "approximation";
}

EstimationMethod estimation_method_from_string(const std::string& name) {
    if (name == "optimization") return EstimationMethod::optimization;
    if (name == "approximation") return EstimationMethod::approximation;
    throw std::invalid_argument("unknown estimation method '" + name + "'");
}

std::string to_string(ExpertCounts counts) {
    return counts == ExpertCounts::occupancy ? "occupancy" : "empirical";
}

ExpertCounts expert_counts_from_string(const std::string& name) {
    if (name == "occupancy") return ExpertCounts::occupancy;
    if (name == "empirical") return ExpertCounts::empirical;
    throw std::invalid_argument("unknown expert count source '" + name + "'");
}

EstimationConfig EstimationConfig::defaults_for(EstimationMethod method, RewardKind kind) {
    EstimationConfig c;
    c.method = method;
    c.step = StepConfig::default_for(kind);
    if (kind == RewardKind::mlp) c.convergence.consecutive = 10;
    return c;
}

std::string to_string(Phase phase) {
    switch (phase) {
        case Phase::precompute: return "precompute";
        case Phase::outer_dp: return "outer_dp";
        case Phase::inner_value: return "inner_value";
        case Phase::inner_grad: return "inner_grad";
        case Phase::inner_step: return "inner_step";
    }
    return "unknown";
}

double TimingBreakdown::inner_total() const {
    return phase_seconds(Phase::inner_value) + phase_seconds(Phase::inner_grad) +
           phase_seconds(Phase::inner_step);
}

double TimingBreakdown::inner_step_average() const {
    if (inner_steps == 0) return 0.0;
    if (inner_steps == 1) return inner_total();
    return (inner_total() - warmup_inner_seconds) / static_cast<double>(inner_steps - 1);
}

long TimingBreakdown::inner_dp_ops() const {
    return phase_dp_ops(Phase::inner_value) + phase_dp_ops(Phase::inner_grad) +
           phase_dp_ops(Phase::inner_step);
}

namespace {

using Clock = std::chrono::steady_clock;

class Profiler {
public:
    explicit Profiler(TimingBreakdown& timing) : timing_(timing) {}

    template <typename F>
    decltype(auto) run(Phase phase, OpKind kind, F&& f) {
        const auto start = Clock::now();
        struct Stop {
            Profiler& self;
            Phase phase;
            OpKind kind;
            Clock::time_point start;
            ~Stop() {
                const double dt = std::chrono::duration<double>(Clock::now() - start).count();
                const auto i = static_cast<std::size_t>(phase);
                self.timing_.seconds[i] += dt;
                self.timing_.total_seconds += dt;
                (kind == OpKind::dp ? self.timing_.dp_ops[i] : self.timing_.matmul_ops[i]) += 1;
            }
        } stop{*this, phase, kind, start};
        return f();
    }

    void begin_inner_step() { step_start_ = timing_.inner_total(); }
    void end_inner_step() {
        if (timing_.inner_steps == 0) timing_.warmup_inner_seconds = timing_.inner_total() - step_start_;
        ++timing_.inner_steps;
    }

private:
    TimingBreakdown& timing_;
    double step_start_ = 0.0;
};

void check_inputs(const TabularMDP& mdp, const FeatureMap& features, const RewardModel& model,
                  const ExpertEstimate& expert) {
    if (features.n_states() != mdp.n_states() || features.n_actions() != mdp.n_actions())
        throw std::invalid_argument("estimator: feature map and MDP dimensions differ");
    if (features.dim() != model.input_dim())
        throw std::invalid_argument("estimator: reward model input does not match feature dimension");
    if (expert.policy.n_states() != mdp.n_states() || expert.policy.n_actions() != mdp.n_actions())
        throw std::invalid_argument("estimator: expert estimate and MDP dimensions differ");
}

// Reward derivatives are constant for linear models; MLP derivatives are
// recomputed each step.
class GradientCache {
public:
    GradientCache(const RewardModel& model, const FeatureMap& features) : features_(features) {
        if (model.kind() == RewardKind::linear) constant_ = reward_gradient(model, features);
    }
    const RewardGradientTensor& get(const RewardModel& model) {
        if (constant_) return *constant_;
        last_ = reward_gradient(model, features_);
        return last_;
    }

private:
    const FeatureMap& features_;
    std::optional<RewardGradientTensor> constant_;
    RewardGradientTensor last_;
};

double sup_norm(const VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Gradient of the approximation objective, contracting the value
// derivatives against the expert weighting without materializing them.
VectorXd approximation_gradient_from(const OccupancyTables& cond, const VectorXd& expert_occ,
                                     const StochasticPolicy& pi_hat, const StochasticPolicy& pi_theta,
                                     const StochasticPolicy& pi_tilde, const RewardGradientTensor& d) {
    const int na = d.n_actions;
    VectorXd grad = VectorXd::Zero(d.n_params());
    VectorXd back = VectorXd::Zero(d.n_states);
    for (int a = 0; a < na; ++a) {
        const VectorXd w =
            expert_occ.cwiseProduct(pi_hat.probs().col(a) - pi_theta.probs().col(a));
        grad.noalias() += d.action_block(a).transpose() * w;
        back.noalias() += cond.cond_occ[static_cast<std::size_t>(a)].transpose() * w;
    }
    grad.noalias() += cond.discount * (expected_reward_gradient(pi_tilde, d).transpose() * back);
    return grad;
}

struct InnerOutcome {
    RewardModel model;
    StochasticPolicy policy;
    bool converged;
};

}  // namespace

EstimationResult run_optimization_based(const TabularMDP& mdp, const FeatureMap& features,
                                        const RewardModel& reward_init, const ExpertEstimate& expert,
                                        EstimationConfig config) {
    check_inputs(mdp, features, reward_init, expert);
    if (config.convergence.threshold <= 0.0)
        throw std::invalid_argument("estimator: convergence threshold must be > 0");

    TimingBreakdown timing;
    Profiler prof(timing);
    GradientCache grads(reward_init, features);

    const OccupancyTables expert_occ = prof.run(Phase::precompute, OpKind::dp,
                                                [&] { return occupancy_state(mdp, expert.policy, config.solver); });
    const bool empirical = config.expert_counts == ExpertCounts::empirical;
    if (empirical && (expert.discounted_visits.rows() != mdp.n_states() ||
                      expert.discounted_visits.cols() != mdp.n_actions() ||
                      expert.start_dist.size() != mdp.n_states()))
        throw std::invalid_argument("estimator: empirical expert counts need trajectory statistics from the data");
    const std::optional<TabularMDP> learner_mdp =
        empirical ? std::optional<TabularMDP>(mdp.with_initial_dist(expert.start_dist)) : std::nullopt;
    auto expert_counts = [&](const RewardGradientTensor& d) -> VectorXd {
        if (!empirical) return expert_feature_gradient(expert_occ, expert.policy, d);
        // Truncated trajectories carry less discounted mass than the model
        // occupancy; rescaling keeps reward offsets out of the gradient.
        const double scale = expert_occ.state_occ.sum() / expert.discounted_visits.sum();
        VectorXd mu = VectorXd::Zero(d.n_params());
        for (int a = 0; a < d.n_actions; ++a)
            mu.noalias() += d.action_block(a).transpose() * expert.discounted_visits.col(a);
        return VectorXd(scale * mu);
    };
    std::optional<VectorXd> mu_expert;
    if (reward_init.kind() == RewardKind::linear)
        mu_expert = prof.run(Phase::precompute, OpKind::matmul, [&] { return expert_counts(grads.get(reward_init)); });

    RewardModel model = reward_init;
    std::optional<StochasticPolicy> policy;
    MatrixXd last_q;
    std::vector<TraceEntry> trace;
    bool converged = false;
    int below = 0;

    for (long it = 0;; ++it) {
        prof.begin_inner_step();
        const auto solved = prof.run(Phase::inner_value, OpKind::dp, [&] {
            const MatrixXd r = reward_table(model, features);
            SolverOptions opts = config.solver;
            if (config.warm_start_value && last_q.size()) opts.warm_start = &last_q;
            return soft_value_iteration(mdp, r, opts);
        });
        last_q = solved.q;
        policy = StochasticPolicy::softmax(solved.q);

        const OccupancyTables occ = prof.run(Phase::inner_grad, OpKind::dp,
                                             [&] { return occupancy_state(learner_mdp ? *learner_mdp : mdp, *policy, config.solver); });
        const auto [grad, objective] = prof.run(Phase::inner_grad, OpKind::matmul, [&] {
            const RewardGradientTensor& d = grads.get(model);
            const VectorXd mu_e = mu_expert ? *mu_expert : expert_counts(d);
            const VectorXd mu_theta = expert_feature_gradient(occ, *policy, d);
            return std::pair<VectorXd, double>(
                mu_e - mu_theta, weighted_log_likelihood(expert_occ.state_occ, expert.policy, *policy));
        });

        const double norm = sup_norm(grad);
        below = norm < config.convergence.threshold ? below + 1 : 0;
        const bool done = below >= config.convergence.consecutive;
        const bool capped = it + 1 >= config.convergence.max_iterations;
        if (!done && !capped)
            model = prof.run(Phase::inner_step, OpKind::matmul,
                             [&] { return apply_gradient_step(model, grad, config.step); });
        prof.end_inner_step();
        trace.push_back({0, it, norm, objective, timing.total_seconds});
        if (done) converged = true;
        if (done || capped) break;
    }

    EstimationResult result{model, *policy, std::move(trace), timing, converged, {model.params()}, {}};
    return result;
}

EstimationResult run_optimization_based(const TabularMDP& mdp, const FeatureMap& features,
                                        const RewardModel& reward_init, const Dataset& data,
                                        EstimationConfig config) {
    validate_dataset(mdp, data, false);
    ExpertEstimate expert = estimate_expert_policy(data, mdp.n_states(), mdp.n_actions(), config.smoothing);
    attach_trajectory_counts(expert, data, mdp.discount());
    return run_optimization_based(mdp, features, reward_init, expert, std::move(config));
}

EstimationResult run_approximation_based(const TabularMDP& mdp, const FeatureMap& features,
                                         const RewardModel& reward_init, const ExpertEstimate& expert,
                                         EstimationConfig config) {
    check_inputs(mdp, features, reward_init, expert);
    if (config.outer_iterations < 1) throw std::invalid_argument("estimator: outer iterations K must be >= 1");
    if (config.convergence.threshold <= 0.0)
        throw std::invalid_argument("estimator: convergence threshold must be > 0");

    TimingBreakdown timing;
    Profiler prof(timing);
    GradientCache grads(reward_init, features);

    const OccupancyTables expert_occ = prof.run(Phase::precompute, OpKind::dp,
                                                [&] { return occupancy_state(mdp, expert.policy, config.solver); });

    RewardModel model = reward_init;
    StochasticPolicy pi_tilde = expert.policy;
    std::optional<StochasticPolicy> policy;
    std::vector<TraceEntry> trace;
    std::vector<VectorXd> outer_params;
    std::vector<StochasticPolicy> outer_policies;
    bool converged = false;

    for (int k = 0; k < config.outer_iterations; ++k) {
        const OccupancyTables cond = prof.run(Phase::outer_dp, OpKind::dp, [&] {
            return occupancy_conditional(mdp, pi_tilde, config.solver);
        });
        int below = 0;
        converged = false;
        for (long it = 0;; ++it) {
            prof.begin_inner_step();
            prof.run(Phase::inner_value, OpKind::matmul, [&] {
                const MatrixXd r = reward_table(model, features);
                policy = StochasticPolicy::softmax(soft_value_from_occupancy(cond, r, pi_tilde));
            });
            const auto [grad, objective] = prof.run(Phase::inner_grad, OpKind::matmul, [&] {
                const RewardGradientTensor& d = grads.get(model);
                return std::pair<VectorXd, double>(
                    approximation_gradient_from(cond, expert_occ.state_occ, expert.policy, *policy, pi_tilde, d),
                    weighted_log_likelihood(expert_occ.state_occ, expert.policy, *policy));
            });

            const double norm = sup_norm(grad);
            below = norm < config.convergence.threshold ? below + 1 : 0;
            const bool done = below >= config.convergence.consecutive;
            const bool capped = it + 1 >= config.convergence.max_iterations;
            if (!done && !capped)
                model = prof.run(Phase::inner_step, OpKind::matmul,
                                 [&] { return apply_gradient_step(model, grad, config.step); });
            prof.end_inner_step();
            trace.push_back({k, it, norm, objective, timing.total_seconds});
            if (done) converged = true;
            if (done || capped) break;
        }
        pi_tilde = *policy;
        outer_params.push_back(model.params());
        outer_policies.push_back(*policy);
    }

    return EstimationResult{model,    *policy,     std::move(trace), timing, converged,
                            std::move(outer_params), std::move(outer_policies)};
}

EstimationResult run_approximation_based(const TabularMDP& mdp, const FeatureMap& features,
                                         const RewardModel& reward_init, const Dataset& data,
                                         EstimationConfig config) {
    validate_dataset(mdp, data, false);
    return run_approximation_based(
        mdp, features, reward_init,
        estimate_expert_policy(data, mdp.n_states(), mdp.n_actions(), config.smoothing), std::move(config));
}

EstimationResult estimate(const TabularMDP& mdp, const FeatureMap& features, const RewardModel& reward_init,
                          const ExpertEstimate& expert, const EstimationConfig& config) {
    return config.method == EstimationMethod::optimization
               ? run_optimization_based(mdp, features, reward_init, expert, config)
               : run_approximation_based(mdp, features, reward_init, expert, config);
}

double optimization_objective(const TabularMDP& mdp, const FeatureMap& features, const RewardModel& model,
                              const ExpertEstimate& expert, const SolverOptions& options) {
    check_inputs(mdp, features, model, expert);
    const auto solved = soft_value_iteration(mdp, reward_table(model, features), options);
    const auto occ = occupancy_state(mdp, expert.policy, options);
    return weighted_log_likelihood(occ.state_occ, expert.policy, StochasticPolicy::softmax(solved.q));
}

double approximation_objective(const TabularMDP& mdp, const FeatureMap& features, const RewardModel& model,
                               const ExpertEstimate& expert, const StochasticPolicy& pi_tilde,
                               const SolverOptions& options) {
    check_inputs(mdp, features, model, expert);
    const auto q = soft_policy_evaluation(mdp, reward_table(model, features), pi_tilde, options).q;
    const auto occ = occupancy_state(mdp, expert.policy, options);
    return weighted_log_likelihood(occ.state_occ, expert.policy, StochasticPolicy::softmax(q));
}

VectorXd optimization_gradient(const TabularMDP& mdp, const FeatureMap& features, const RewardModel& model,
                               const ExpertEstimate& expert, const SolverOptions& options) {
    check_inputs(mdp, features, model, expert);
    const auto solved = soft_value_iteration(mdp, reward_table(model, features), options);
    const auto policy = StochasticPolicy::softmax(solved.q);
    const auto d = reward_gradient(model, features);
    return expert_feature_gradient(occupancy_state(mdp, expert.policy, options), expert.policy, d) -
           expert_feature_gradient(occupancy_state(mdp, policy, options), policy, d);
}

VectorXd approximation_gradient(const TabularMDP& mdp, const FeatureMap& features, const RewardModel& model,
                                const ExpertEstimate& expert, const StochasticPolicy& pi_tilde,
                                const SolverOptions& options) {
    check_inputs(mdp, features, model, expert);
    const auto cond = occupancy_conditional(mdp, pi_tilde, options);
    const MatrixXd r = reward_table(model, features);
    const auto policy = StochasticPolicy::softmax(soft_value_from_occupancy(cond, r, pi_tilde));
    return approximation_gradient_from(cond, occupancy_state(mdp, expert.policy, options).state_occ,
                                       expert.policy, policy, pi_tilde, reward_gradient(model, features));
}

GradientEquivalenceReport gradient_equivalence_check(const TabularMDP& mdp, const FeatureMap& features,
                                                     const VectorXd& theta, const ExpertEstimate& expert,
                                                     const SolverOptions& options) {
    const RewardModel model = RewardModel::linear(theta);
    check_inputs(mdp, features, model, expert);
    const auto d = reward_gradient(model, features);
    const auto solved = soft_value_iteration(mdp, reward_table(model, features), options);
    const auto pi_theta = StochasticPolicy::softmax(solved.q);
    const auto expert_occ = occupancy_state(mdp, expert.policy, options);

    // General form: sum_s Occ^E(s) (E_{pi_hat}[dQ] - E_{pi_theta}[dQ]) with
    // dQ the soft-value derivative under pi_tilde = pi_theta.
    const auto dq = value_gradient(occupancy_conditional(mdp, pi_theta, options), pi_theta, d);
    VectorXd general = VectorXd::Zero(model.n_params());
    for (int a = 0; a < mdp.n_actions(); ++a) {
        const VectorXd w = expert_occ.state_occ.cwiseProduct(expert.policy.probs().col(a) -
                                                              pi_theta.probs().col(a));
        general += dq[static_cast<std::size_t>(a)].transpose() * w;
    }

    const VectorXd difference = expert_feature_gradient(expert_occ, expert.policy, d) -
                                expert_feature_gradient(occupancy_state(mdp, pi_theta, options), pi_theta, d);

    GradientEquivalenceReport report;
    report.max_abs_discrepancy = sup_norm(general - difference);
    report.general_form = std::move(general);
    report.feature_difference = difference;
    return report;
}

GradientEquivalenceReport gradient_equivalence_check(const TabularMDP& mdp, const FeatureMap& features,
                                                     const VectorXd& theta, const Dataset& data,
                                                     const SolverOptions& options) {
    validate_dataset(mdp, data, false);
    return gradient_equivalence_check(mdp, features, theta,
                                      estimate_expert_policy(data, mdp.n_states(), mdp.n_actions()), options);
}

}  // namespace irl
