#pragma once

#include "irl/mdp.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace irl {

/**
 * State-action features. Rows are laid out action-major: row a * n_states + s
 * holds f(s, a), so the block for one action is contiguous.
 */
class FeatureMap {
public:
    FeatureMap(MatrixXd features, int n_states, int n_actions);

    /// Broadcasts per-state features f(s) over all actions.
    static FeatureMap from_state_features(const MatrixXd& state_features, int n_actions);
    /// Identity features over states, broadcast over actions.
    static FeatureMap one_hot_states(int n_states, int n_actions);

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    int dim() const { return static_cast<int>(features_.cols()); }
    const MatrixXd& matrix() const { return features_; }
    auto row(int s, int a) const { return features_.row(static_cast<Eigen::Index>(a) * n_states_ + s); }

private:
    MatrixXd features_;
    int n_states_;
    int n_actions_;
};

enum class RewardKind { linear, mlp };

std::string to_string(RewardKind kind);
RewardKind reward_kind_from_string(const std::string& name);

/**
 * Parameterized reward r(s, a, theta). Linear models compute theta . f(s, a).
 * MLP models map the feature vector through ReLU hidden layers to a scalar;
 * parameters are stored flat, layer by layer, as (W column-major, b).
 */
class RewardModel {
public:
    static RewardModel linear(VectorXd theta);
    /// Hidden layers default to {32, 16}. Weights are uniform in
    /// +-1/sqrt(fan_in); biases start at zero.
    static RewardModel mlp(int input_dim, std::uint64_t seed, std::vector<int> hidden = {32, 16});
    static RewardModel mlp_with_params(std::vector<int> layer_sizes, VectorXd params);

    RewardKind kind() const { return kind_; }
    const VectorXd& params() const { return params_; }
    int n_params() const { return static_cast<int>(params_.size()); }
    int input_dim() const { return layer_sizes_.front(); }
    /// {input, hidden..., 1} for MLP; {input} for linear.
    const std::vector<int>& layer_sizes() const { return layer_sizes_; }

    RewardModel with_params(VectorXd params) const;

private:
    RewardModel(RewardKind kind, std::vector<int> layer_sizes, VectorXd params);

    RewardKind kind_;
    std::vector<int> layer_sizes_;
    VectorXd params_;
};

/// Reward-parameter derivatives D(row, i) = dr(s,a)/dtheta_i, rows laid out
/// like FeatureMap.
struct RewardGradientTensor {
    MatrixXd grad;
    int n_states = 0;
    int n_actions = 0;

    int n_params() const { return static_cast<int>(grad.cols()); }
    auto action_block(int a) const {
        return grad.middleRows(static_cast<Eigen::Index>(a) * n_states, n_states);
    }
};

/// r[s][a] as an n_states x n_actions matrix.
MatrixXd reward_table(const RewardModel& model, const FeatureMap& features);
RewardGradientTensor reward_gradient(const RewardModel& model, const FeatureMap& features);

enum class OptimizerKind { gradient_ascent, adam };

/**
 * Step rule plus optimizer state. Adam moments live here and advance with each
 * call to apply_gradient_step.
 */
struct StepConfig {
    OptimizerKind kind = OptimizerKind::gradient_ascent;
    double rate = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    VectorXd first_moment;
    VectorXd second_moment;
    long step_count = 0;

    /// Plain ascent for linear models, Adam (rate 1e-3) for MLPs.
    static StepConfig default_for(RewardKind kind);
};

/// theta <- theta + step(grad). Throws NonFiniteGradient on NaN/inf entries.
RewardModel apply_gradient_step(const RewardModel& model, const VectorXd& grad, StepConfig& config);

}  // namespace irl
