#include "irl/errors.hpp"
#include "irl/reward.hpp"
#include "random_instances.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace irl;
using irl::testing::random_features;
using irl::testing::random_vector;

namespace {

double relative_error(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

TEST(RewardTable, ZeroParamsGiveZeroReward) {
    std::mt19937_64 rng(1);
    const auto f = random_features(4, 3, 5, rng);
    EXPECT_TRUE(reward_table(RewardModel::linear(VectorXd::Zero(5)), f).isZero(0.0));
}

TEST(RewardTable, PathObstacleGoalIndicators) {
    // Cells: path, obstacle, goal.
    const MatrixXd state_features = MatrixXd::Identity(3, 3);
    const auto f = FeatureMap::from_state_features(state_features, 2);
    const MatrixXd r = reward_table(RewardModel::linear((VectorXd(3) << 0.2, 0.0, 1.0).finished()), f);
    for (int a = 0; a < 2; ++a) {
        EXPECT_DOUBLE_EQ(r(0, a), 0.2);
        EXPECT_DOUBLE_EQ(r(1, a), 0.0);
        EXPECT_DOUBLE_EQ(r(2, a), 1.0);
    }
}

TEST(RewardTable, LinearMatchesDotProducts) {
    std::mt19937_64 rng(2);
    const auto f = random_features(6, 3, 4, rng);
    const VectorXd theta = random_vector(4, rng);
    const MatrixXd r = reward_table(RewardModel::linear(theta), f);
    for (int s = 0; s < 6; ++s)
        for (int a = 0; a < 3; ++a) {
            double want = 0.0;
            for (int i = 0; i < 4; ++i) want += theta[i] * f.row(s, a)[i];
            EXPECT_NEAR(r(s, a), want, 1e-14);
        }
}

TEST(RewardTable, LinearAdditivity) {
    std::mt19937_64 rng(3);
    const auto f = random_features(5, 2, 3, rng);
    const VectorXd t1 = random_vector(3, rng), t2 = random_vector(3, rng);
    const MatrixXd sum = reward_table(RewardModel::linear(t1), f) + reward_table(RewardModel::linear(t2), f);
    EXPECT_TRUE(reward_table(RewardModel::linear(t1 + t2), f).isApprox(sum, 1e-13));
}

TEST(RewardTable, DimensionMismatch) {
    std::mt19937_64 rng(4);
    const auto f = random_features(3, 2, 3, rng);
    EXPECT_THROW(reward_table(RewardModel::linear(VectorXd::Zero(4)), f), std::invalid_argument);
    EXPECT_THROW(reward_gradient(RewardModel::mlp(4, 1), f), std::invalid_argument);
}

TEST(RewardGradient, LinearIsFeatureMapForAnyTheta) {
    std::mt19937_64 rng(5);
    const auto f = random_features(5, 3, 4, rng);
    for (int i = 0; i < 3; ++i) {
        const auto d = reward_gradient(RewardModel::linear(random_vector(4, rng)), f);
        EXPECT_EQ(d.grad, f.matrix());
    }
}

TEST(RewardGradient, ZeroNetworkDeadRelu) {
    const std::vector<int> sizes{3, 4, 2, 1};
    const auto zero = RewardModel::mlp_with_params(sizes, VectorXd::Zero(3 * 4 + 4 + 4 * 2 + 2 + 2 + 1));
    std::mt19937_64 rng(6);
    const auto f = random_features(4, 2, 3, rng);
    const auto d = reward_gradient(zero, f);
    const int last = zero.n_params() - 1;
    EXPECT_TRUE(d.grad.leftCols(last).isZero(0.0));
    EXPECT_TRUE((d.grad.col(last).array() == 1.0).all());
}

TEST(RewardGradient, MlpMatchesCentralDifferences) {
    std::mt19937_64 rng(7);
    const auto f = random_features(5, 3, 4, rng);
    const auto model = RewardModel::mlp(4, 42);
    const auto d = reward_gradient(model, f);
    const double h = 1e-5;
    double worst = 0.0;
    for (int i = 0; i < model.n_params(); ++i) {
        VectorXd up = model.params(), down = model.params();
        up[i] += h;
        down[i] -= h;
        const MatrixXd fd =
            (reward_table(model.with_params(up), f) - reward_table(model.with_params(down), f)) / (2 * h);
        for (int a = 0; a < 3; ++a)
            for (int s = 0; s < 5; ++s)
                worst = std::max(worst, relative_error(fd(s, a), d.action_block(a)(s, i)));
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(RewardGradient, DirectionalDerivative) {
    std::mt19937_64 rng(8);
    const auto f = random_features(6, 2, 3, rng);
    for (const auto& model : {RewardModel::linear(random_vector(3, rng)), RewardModel::mlp(3, 9)}) {
        VectorXd dir = random_vector(model.n_params(), rng);
        dir.normalize();
        const double h = 1e-5;
        const MatrixXd fd = (reward_table(model.with_params(model.params() + h * dir), f) -
                             reward_table(model.with_params(model.params() - h * dir), f)) /
                            (2 * h);
        const VectorXd analytic = reward_gradient(model, f).grad * dir;
        for (int a = 0; a < 2; ++a)
            for (int s = 0; s < 6; ++s) EXPECT_LT(relative_error(fd(s, a), analytic[a * 6 + s]), 1e-4);
    }
}

TEST(GradientStep, ZeroGradientIsFixedPoint) {
    const auto model = RewardModel::mlp(3, 1);
    auto adam = StepConfig::default_for(RewardKind::mlp);
    EXPECT_EQ(apply_gradient_step(model, VectorXd::Zero(model.n_params()), adam).params(), model.params());
    auto plain = StepConfig::default_for(RewardKind::linear);
    const auto lin = RewardModel::linear(VectorXd::Ones(3));
    EXPECT_EQ(apply_gradient_step(lin, VectorXd::Zero(3), plain).params(), lin.params());
}

TEST(GradientStep, SingleLinearStep) {
    StepConfig cfg;
    cfg.rate = 0.1;
    const auto next = apply_gradient_step(RewardModel::linear(VectorXd::Zero(3)), (VectorXd(3) << 1, 0, 0).finished(), cfg);
    EXPECT_DOUBLE_EQ(next.params()[0], 0.1);
    EXPECT_EQ(next.params()[1], 0.0);
    EXPECT_EQ(next.params()[2], 0.0);
}

TEST(GradientStep, AdamMatchesScalarReference) {
    const double g = 0.37;
    auto cfg = StepConfig::default_for(RewardKind::mlp);
    auto model = RewardModel::linear(VectorXd::Zero(1));
    double x = 0.0, m = 0.0, v = 0.0;
    for (int k = 1; k <= 25; ++k) {
        model = apply_gradient_step(model, VectorXd::Constant(1, g), cfg);
        m = cfg.beta1 * m + (1 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
        const double mh = m / (1 - std::pow(cfg.beta1, k));
        const double vh = v / (1 - std::pow(cfg.beta2, k));
        x += cfg.rate * mh / (std::sqrt(vh) + cfg.epsilon);
        EXPECT_NEAR(model.params()[0], x, 1e-15);
    }
}

TEST(GradientStep, NonFiniteGradientNamesIndices) {
    StepConfig cfg;
    VectorXd g = VectorXd::Zero(4);
    g[1] = std::nan("");
    g[3] = INFINITY;
    try {
        apply_gradient_step(RewardModel::linear(VectorXd::Zero(4)), g, cfg);
        FAIL() << "expected NonFiniteGradient";
    } catch (const NonFiniteGradient& e) {
        EXPECT_EQ(e.indices(), (std::vector<int>{1, 3}));
    }
    EXPECT_THROW(apply_gradient_step(RewardModel::linear(VectorXd::Zero(4)), VectorXd::Zero(3), cfg),
                 std::invalid_argument);
}

TEST(RewardModel, MlpInitBoundedByFanIn) {
    const auto model = RewardModel::mlp(8, 3);
    EXPECT_EQ(model.layer_sizes(), (std::vector<int>{8, 32, 16, 1}));
    EXPECT_EQ(model.n_params(), 8 * 32 + 32 + 32 * 16 + 16 + 16 + 1);
    EXPECT_LE(model.params().head(8 * 32).cwiseAbs().maxCoeff(), 1.0 / std::sqrt(8.0));
    EXPECT_TRUE(model.params().segment(8 * 32, 32).isZero(0.0));
}
