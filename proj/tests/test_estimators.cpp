#include "irl/environments.hpp"
#include "irl/estimators.hpp"
#include "random_instances.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace irl;
using irl::testing::random_features;
using irl::testing::random_mdp;
using irl::testing::random_policy;
using irl::testing::random_vector;

namespace {

Dataset sample_dataset(const TabularMDP& mdp, const StochasticPolicy& pi, int n, int horizon, std::uint64_t seed) {
    Dataset d;
    for (int i = 0; i < n; ++i) d.trajectories.push_back(sample_trajectory(mdp, pi, horizon, seed * 1000 + i));
    return d;
}

ExpertEstimate estimate_from(const StochasticPolicy& pi) {
    return {pi, MatrixXd::Ones(pi.n_states(), pi.n_actions()), std::vector<bool>(pi.n_states(), true), {}, {}};
}

double relative_error(const VectorXd& a, const VectorXd& b) {
    return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST(ExpertPolicy, EmpiricalFrequencies) {
    Dataset d;
    d.trajectories.push_back({{{0, 0}, {0, 0}, {0, 1}, {0, 0}}, std::nullopt});
    const auto est = estimate_expert_policy(d, 2, 4);
    EXPECT_DOUBLE_EQ(est.policy(0, 0), 0.75);
    EXPECT_DOUBLE_EQ(est.policy(0, 1), 0.25);
    for (int a = 0; a < 4; ++a) EXPECT_DOUBLE_EQ(est.policy(1, a), 0.25);
    EXPECT_TRUE(est.visited[0]);
    EXPECT_FALSE(est.visited[1]);
}

TEST(ExpertPolicy, SmoothedRecount) {
    std::mt19937_64 rng(1);
    const auto mdp = random_mdp(6, 3, 0.9, rng);
    const auto data = sample_dataset(mdp, random_policy(6, 3, rng), 5, 12, 3);
    const auto est = estimate_expert_policy(data, 6, 3, 0.1);
    MatrixXd n = MatrixXd::Zero(6, 3);
    for (const auto& t : data.trajectories)
        for (const auto& st : t.steps) n(st.state, st.action) += 1;
    for (int s = 0; s < 6; ++s) {
        const double total = n.row(s).sum();
        for (int a = 0; a < 3; ++a) {
            const double want = total > 0 ? (n(s, a) + 0.1) / (total + 0.3) : 1.0 / 3;
            EXPECT_NEAR(est.policy(s, a), want, 1e-15);
        }
    }
    EXPECT_EQ(est.visit_counts, n);
}

TEST(ExpertPolicy, EmptyDataset) {
    EXPECT_THROW(estimate_expert_policy(Dataset{}, 2, 2), std::invalid_argument);
}

TEST(ExpertPolicy, DiscountedVisitation) {
    Dataset d;
    d.trajectories.push_back({{{0, 1}, {1, 0}, {0, 1}}, std::nullopt});
    d.trajectories.push_back({{{1, 0}}, std::nullopt});
    const MatrixXd w = discounted_visitation(d, 2, 2, 0.5);
    EXPECT_DOUBLE_EQ(w(0, 1), (1.0 + 0.25) / 2);
    EXPECT_DOUBLE_EQ(w(1, 0), (0.5 + 1.0) / 2);
    EXPECT_EQ(w(0, 0), 0.0);
    ExpertEstimate est = estimate_expert_policy(d, 2, 2);
    attach_trajectory_counts(est, d, 0.5);
    EXPECT_DOUBLE_EQ(est.start_dist[0], 0.5);
    EXPECT_DOUBLE_EQ(est.start_dist[1], 0.5);
}

TEST(ExpertFeatureGradient, ZeroGradientTensor) {
    std::mt19937_64 rng(2);
    const auto mdp = random_mdp(4, 2, 0.9, rng);
    const auto pi = random_policy(4, 2, rng);
    RewardGradientTensor d{MatrixXd::Zero(8, 3), 4, 2};
    EXPECT_TRUE(expert_feature_gradient(occupancy_state(mdp, pi), pi, d).isZero(0.0));
}

TEST(ExpertFeatureGradient, NoLookaheadOneHotIsInitialDist) {
    std::mt19937_64 rng(3);
    const auto mdp = random_mdp(5, 3, 0.0, rng);
    const auto pi = random_policy(5, 3, rng);
    const auto d = reward_gradient(RewardModel::linear(VectorXd::Zero(5)), FeatureMap::one_hot_states(5, 3));
    EXPECT_LT((expert_feature_gradient(occupancy_state(mdp, pi), pi, d) - mdp.initial_dist()).cwiseAbs().maxCoeff(),
              1e-15);
}

TEST(ExpertFeatureGradient, TripleLoop) {
    std::mt19937_64 rng(4);
    const auto mdp = random_mdp(5, 3, 0.9, rng);
    const auto pi = random_policy(5, 3, rng);
    const auto f = random_features(5, 3, 4, rng);
    const auto occ = occupancy_state(mdp, pi);
    const auto d = reward_gradient(RewardModel::linear(VectorXd::Zero(4)), f);
    VectorXd want = VectorXd::Zero(4);
    for (int s = 0; s < 5; ++s)
        for (int a = 0; a < 3; ++a)
            for (int i = 0; i < 4; ++i) want[i] += occ.state_occ[s] * pi(s, a) * f.row(s, a)[i];
    EXPECT_LT((expert_feature_gradient(occ, pi, d) - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(OptimizationBased, SingleStateGradientIsZero) {
    const TabularMDP mdp({MatrixXd::Identity(1, 1)}, VectorXd::Ones(1), 0.9);
    const FeatureMap f(MatrixXd::Constant(1, 2, 0.7), 1, 1);
    const auto est = estimate_from(StochasticPolicy::uniform(1, 1));
    for (double x : {-1.0, 0.0, 2.5})
        EXPECT_TRUE(optimization_gradient(mdp, f, RewardModel::linear(VectorXd::Constant(2, x)), est).isZero(1e-12));
}

TEST(OptimizationBased, GradientAtTruthWithinBootstrapNoise) {
    std::mt19937_64 rng(5);
    const auto mdp = random_mdp(5, 2, 0.8, rng);
    const auto f = random_features(5, 2, 3, rng);
    const VectorXd theta = random_vector(3, rng);
    const auto model = RewardModel::linear(theta);
    const auto expert = StochasticPolicy::softmax(soft_value_iteration(mdp, reward_table(model, f)).q);
    const auto data = sample_dataset(mdp, expert, 400, 40, 7);
    const VectorXd g = optimization_gradient(mdp, f, model, estimate_expert_policy(data, 5, 2));

    std::mt19937_64 boot(6);
    std::uniform_int_distribution<std::size_t> pick(0, data.trajectories.size() - 1);
    const int b = 40;
    MatrixXd samples(b, 3);
    for (int i = 0; i < b; ++i) {
        Dataset re;
        for (std::size_t j = 0; j < data.trajectories.size(); ++j) re.trajectories.push_back(data.trajectories[pick(boot)]);
        samples.row(i) = optimization_gradient(mdp, f, model, estimate_expert_policy(re, 5, 2)).transpose();
    }
    const VectorXd mean = samples.colwise().mean().transpose();
    double noise = 0.0;
    for (int i = 0; i < b; ++i) noise = std::max(noise, (samples.row(i).transpose() - mean).norm());
    EXPECT_LT(g.norm(), 10.0 * noise);
}

TEST(OptimizationBased, ObstacleworldRanksGoalPathObstacle) {
    const auto env = build_obstacleworld(ObstacleworldSpec::default_layout());
    const auto data = generate_expert(env.mdp, env.true_reward, ExpertKind::soft_optimal, 50, env.horizon, 0);
    auto cfg = EstimationConfig::defaults_for(EstimationMethod::optimization, RewardKind::linear);
    cfg.expert_counts = ExpertCounts::empirical;
    const auto r = run_optimization_based(env.mdp, env.features, RewardModel::linear(VectorXd::Zero(3)), data, cfg);
    EXPECT_TRUE(r.converged);
    EXPECT_GT(r.theta()[2], r.theta()[0]);
    EXPECT_GT(r.theta()[0], r.theta()[1]);
}

TEST(OptimizationBased, EmpiricalCountsNeedTrajectoryStats) {
    std::mt19937_64 rng(8);
    const auto mdp = random_mdp(3, 2, 0.9, rng);
    auto cfg = EstimationConfig::defaults_for(EstimationMethod::optimization, RewardKind::linear);
    cfg.expert_counts = ExpertCounts::empirical;
    EXPECT_THROW(run_optimization_based(mdp, random_features(3, 2, 2, rng), RewardModel::linear(VectorXd::Zero(2)),
                                        estimate_from(StochasticPolicy::uniform(3, 2)), cfg),
                 std::invalid_argument);
}

TEST(ApproximationBased, CcpMomentConditionAtConvergence) {
    std::mt19937_64 rng(9);
    const auto mdp = random_mdp(6, 3, 0.9, rng);
    const auto f = random_features(6, 3, 3, rng);
    const auto expert = estimate_from(random_policy(6, 3, rng));
    auto cfg = EstimationConfig::defaults_for(EstimationMethod::approximation, RewardKind::linear);
    cfg.step.rate = 0.02;
    const auto r = run_approximation_based(mdp, f, RewardModel::linear(VectorXd::Zero(3)), expert, cfg);
    ASSERT_TRUE(r.converged);
    const VectorXd moment = approximation_gradient(mdp, f, r.model, expert, expert.policy);
    EXPECT_LT(moment.cwiseAbs().maxCoeff(), cfg.convergence.threshold);
}

TEST(ApproximationBased, SoftOptimalPiTildeMatchesOptimizationGradient) {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 5; ++trial) {
        const auto mdp = random_mdp(5, 3, 0.9, rng);
        const auto f = random_features(5, 3, 3, rng);
        const auto model = RewardModel::linear(random_vector(3, rng));
        const auto expert = estimate_from(random_policy(5, 3, rng));
        const auto pi_theta = StochasticPolicy::softmax(soft_value_iteration(mdp, reward_table(model, f)).q);
        EXPECT_LT((approximation_gradient(mdp, f, model, expert, pi_theta) - optimization_gradient(mdp, f, model, expert))
                      .cwiseAbs()
                      .maxCoeff(),
                  1e-8);
    }
}

TEST(ApproximationBased, InnerLoopRunsNoDynamicProgramming) {
    std::mt19937_64 rng(11);
    const auto mdp = random_mdp(6, 2, 0.9, rng);
    const auto f = random_features(6, 2, 3, rng);
    const auto expert = estimate_from(random_policy(6, 2, rng));
    auto cfg = EstimationConfig::defaults_for(EstimationMethod::approximation, RewardKind::linear);
    cfg.outer_iterations = 3;
    const auto r = run_approximation_based(mdp, f, RewardModel::linear(VectorXd::Zero(3)), expert, cfg);
    EXPECT_EQ(r.timing.inner_dp_ops(), 0);
    EXPECT_EQ(r.timing.phase_dp_ops(Phase::outer_dp), 3);
    EXPECT_EQ(r.outer_params.size(), 3u);

    const auto o = run_optimization_based(mdp, f, RewardModel::linear(VectorXd::Zero(3)), expert,
                                          EstimationConfig::defaults_for(EstimationMethod::optimization, RewardKind::linear));
    EXPECT_EQ(o.timing.inner_dp_ops(), 2 * static_cast<long>(o.trace.size()));
}

TEST(ApproximationBased, CcpIsFirstNplIterate) {
    std::mt19937_64 rng(12);
    const auto mdp = random_mdp(7, 3, 0.9, rng);
    const auto f = random_features(7, 3, 3, rng);
    const auto expert = estimate_from(random_policy(7, 3, rng));
    auto cfg = EstimationConfig::defaults_for(EstimationMethod::approximation, RewardKind::linear);
    const auto ccp = run_approximation_based(mdp, f, RewardModel::linear(VectorXd::Zero(3)), expert, cfg);
    cfg.outer_iterations = 5;
    const auto npl = run_approximation_based(mdp, f, RewardModel::linear(VectorXd::Zero(3)), expert, cfg);
    ASSERT_EQ(npl.outer_params.size(), 5u);
    EXPECT_EQ(ccp.theta(), npl.outer_params[0]);
}

TEST(ApproximationBased, RejectsZeroOuterIterations) {
    std::mt19937_64 rng(13);
    const auto mdp = random_mdp(3, 2, 0.9, rng);
    auto cfg = EstimationConfig::defaults_for(EstimationMethod::approximation, RewardKind::linear);
    cfg.outer_iterations = 0;
    EXPECT_THROW(run_approximation_based(mdp, random_features(3, 2, 2, rng), RewardModel::linear(VectorXd::Zero(2)),
                                         estimate_from(StochasticPolicy::uniform(3, 2)), cfg),
                 std::invalid_argument);
}

TEST(GradientEquivalence, RandomInstances) {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 10; ++trial) {
        const auto mdp = random_mdp(5, 3, 0.9, rng);
        const auto f = random_features(5, 3, 4, rng);
        const auto expert = estimate_from(random_policy(5, 3, rng));
        const VectorXd theta = random_vector(4, rng);
        EXPECT_LT(gradient_equivalence_check(mdp, f, theta, expert).max_abs_discrepancy, 1e-7);
        const VectorXd perturbed = theta + 0.3 * random_vector(4, rng);
        EXPECT_LT(gradient_equivalence_check(mdp, f, perturbed, expert).max_abs_discrepancy, 1e-7);
    }
}

TEST(GradientEquivalence, MatchedDistributionsGiveZero) {
    // Every action leads to the same uniform next-state distribution, so the
    // zero reward makes the soft-optimal policy uniform.
    const MatrixXd t = MatrixXd::Constant(3, 3, 1.0 / 3);
    const TabularMDP mdp({t, t}, VectorXd::Constant(3, 1.0 / 3), 0.9);
    std::mt19937_64 rng(15);
    const auto f = random_features(3, 2, 2, rng);
    const auto report = gradient_equivalence_check(mdp, f, VectorXd::Zero(2), estimate_from(StochasticPolicy::uniform(3, 2)));
    EXPECT_LT(report.general_form.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(report.feature_difference.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ObjectiveGradient, MatchesFiniteDifferences) {
    std::mt19937_64 rng(16);
    const auto mdp = random_mdp(5, 2, 0.9, rng);
    const auto f = random_features(5, 2, 3, rng);
    const auto expert = estimate_from(random_policy(5, 2, rng));
    const auto pi_tilde = random_policy(5, 2, rng);
    const double h = 1e-5;
    for (const auto& model : {RewardModel::linear(random_vector(3, rng)), RewardModel::mlp(3, 17, {6, 4})}) {
        VectorXd fd_opt(model.n_params()), fd_app(model.n_params());
        for (int i = 0; i < model.n_params(); ++i) {
            VectorXd up = model.params(), down = model.params();
            up[i] += h;
            down[i] -= h;
            const auto mu = model.with_params(up), md = model.with_params(down);
            fd_opt[i] = (optimization_objective(mdp, f, mu, expert) - optimization_objective(mdp, f, md, expert)) / (2 * h);
            fd_app[i] = (approximation_objective(mdp, f, mu, expert, pi_tilde) -
                         approximation_objective(mdp, f, md, expert, pi_tilde)) /
                        (2 * h);
        }
        EXPECT_LT(relative_error(optimization_gradient(mdp, f, model, expert), fd_opt), 1e-4);
        EXPECT_LT(relative_error(approximation_gradient(mdp, f, model, expert, pi_tilde), fd_app), 1e-4);
    }
}

TEST(ObjectiveTrend, SmoothedObjectiveNonDecreasing) {
    std::mt19937_64 rng(18);
    const auto mdp = random_mdp(6, 3, 0.9, rng);
    const auto f = random_features(6, 3, 3, rng);
    const auto expert = estimate_from(random_policy(6, 3, rng));
    for (auto method : {EstimationMethod::optimization, EstimationMethod::approximation}) {
        auto cfg = EstimationConfig::defaults_for(method, RewardKind::linear);
        cfg.step.rate = 0.01;
        const auto r = estimate(mdp, f, RewardModel::linear(VectorXd::Zero(3)), expert, cfg);
        const std::size_t w = 50;
        ASSERT_GT(r.trace.size(), w);
        double prev = -INFINITY;
        for (std::size_t i = 0; i + w <= r.trace.size(); ++i) {
            double mean = 0.0;
            for (std::size_t j = i; j < i + w; ++j) mean += r.trace[j].objective;
            mean /= static_cast<double>(w);
            EXPECT_GE(mean, prev - 1e-6);
            prev = mean;
        }
    }
}

TEST(Timing, WarmupExcludedFromAverage) {
    TimingBreakdown t;
    t.seconds[static_cast<std::size_t>(Phase::inner_value)] = 5.0;
    t.inner_steps = 3;
    t.warmup_inner_seconds = 3.0;
    EXPECT_DOUBLE_EQ(t.inner_step_average(), 1.0);
}
