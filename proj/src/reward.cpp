#include "irl/reward.hpp"

#include "irl/errors.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace irl {

FeatureMap::FeatureMap(MatrixXd features, int n_states, int n_actions)
    : features_(std::move(features)), n_states_(n_states), n_actions_(n_actions) {
    if (n_states < 1 || n_actions < 1) throw std::invalid_argument("FeatureMap: empty state/action set");
    if (features_.rows() != static_cast<Eigen::Index>(n_states) * n_actions) {
        std::ostringstream msg;
        msg << "FeatureMap: expected " << n_states * n_actions << " rows, got " << features_.rows();
        throw std::invalid_argument(msg.str());
    }
    if (!features_.allFinite()) throw std::invalid_argument("FeatureMap: non-finite feature entries");
}

FeatureMap FeatureMap::from_state_features(const MatrixXd& state_features, int n_actions) {
    const auto ns = state_features.rows();
    MatrixXd full(ns * n_actions, state_features.cols());
    for (int a = 0; a < n_actions; ++a) full.middleRows(a * ns, ns) = state_features;
    return FeatureMap(std::move(full), static_cast<int>(ns), n_actions);
}

FeatureMap FeatureMap::one_hot_states(int n_states, int n_actions) {
    return from_state_features(MatrixXd::Identity(n_states, n_states), n_actions);
}

std::string to_string(RewardKind kind) { return kind == RewardKind::linear ? "linear" : "mlp"; }

RewardKind reward_kind_from_string(const std::string& name) {
    if (name == "linear") return RewardKind::linear;
    if (name == "mlp") return RewardKind::mlp;
    throw std::invalid_argument("unknown reward kind '" + name + "'");
}

namespace {

long mlp_param_count(const std::vector<int>& sizes) {
    long n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += static_cast<long>(sizes[l + 1]) * (sizes[l] + 1);
    return n;
}

}  // namespace

RewardModel::RewardModel(RewardKind kind, std::vector<int> layer_sizes, VectorXd params)
    : kind_(kind), layer_sizes_(std::move(layer_sizes)), params_(std::move(params)) {}

RewardModel RewardModel::linear(VectorXd theta) {
    if (theta.size() == 0) throw std::invalid_argument("RewardModel: empty parameter vector");
    const int d = static_cast<int>(theta.size());
    return RewardModel(RewardKind::linear, {d}, std::move(theta));
}

RewardModel RewardModel::mlp(int input_dim, std::uint64_t seed, std::vector<int> hidden) {
    std::vector<int> sizes{input_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    VectorXd params = VectorXd::Zero(mlp_param_count(sizes));
    std::mt19937_64 rng(seed);
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
        std::uniform_real_distribution<double> init(-bound, bound);
        const Eigen::Index n_weights = static_cast<Eigen::Index>(sizes[l]) * sizes[l + 1];
        for (Eigen::Index i = 0; i < n_weights; ++i) params[offset + i] = init(rng);
        offset += n_weights + sizes[l + 1];
    }
    return RewardModel(RewardKind::mlp, std::move(sizes), std::move(params));
}

RewardModel RewardModel::mlp_with_params(std::vector<int> layer_sizes, VectorXd params) {
    if (layer_sizes.size() < 2 || layer_sizes.back() != 1)
        throw std::invalid_argument("RewardModel: MLP layer sizes must end in a scalar output");
    if (params.size() != mlp_param_count(layer_sizes)) {
        std::ostringstream msg;
        msg << "RewardModel: MLP expects " << mlp_param_count(layer_sizes) << " parameters, got "
            << params.size();
        throw std::invalid_argument(msg.str());
    }
    return RewardModel(RewardKind::mlp, std::move(layer_sizes), std::move(params));
}

RewardModel RewardModel::with_params(VectorXd params) const {
    if (params.size() != params_.size()) throw std::invalid_argument("RewardModel: parameter size mismatch");
    return RewardModel(kind_, layer_sizes_, std::move(params));
}

namespace {

void check_dims(const RewardModel& model, const FeatureMap& features) {
    if (features.dim() != model.input_dim()) {
        std::ostringstream msg;
        msg << "reward model expects " << model.input_dim() << " features, feature map has "
            << features.dim();
        throw std::invalid_argument(msg.str());
    }
}

using ConstMatrixMap = Eigen::Map<const MatrixXd>;

struct Layer {
    ConstMatrixMap weights;  // out x in
    Eigen::Map<const VectorXd> bias;
    Eigen::Index offset;     // offset of weights in the flat vector
};

std::vector<Layer> layers_of(const RewardModel& model) {
    std::vector<Layer> out;
    const auto& sizes = model.layer_sizes();
    const double* data = model.params().data();
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int in = sizes[l];
        const int o = sizes[l + 1];
        out.push_back({ConstMatrixMap(data + offset, o, in),
                       Eigen::Map<const VectorXd>(data + offset + static_cast<Eigen::Index>(o) * in, o),
                       offset});
        offset += static_cast<Eigen::Index>(o) * (in + 1);
    }
    return out;
}

// Pre-activations per layer; activations[0] is the input.
struct Forward {
    std::vector<MatrixXd> pre;
    std::vector<MatrixXd> act;
};

Forward forward(const std::vector<Layer>& layers, const MatrixXd& x) {
    Forward f;
    f.act.push_back(x);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        MatrixXd z = f.act.back() * layers[l].weights.transpose();
        z.rowwise() += layers[l].bias.transpose();
        f.pre.push_back(z);
        if (l + 1 < layers.size())
            f.act.push_back(z.cwiseMax(0.0));
        else
            f.act.push_back(z);
    }
    return f;
}

}  // namespace

MatrixXd reward_table(const RewardModel& model, const FeatureMap& features) {
    check_dims(model, features);
    VectorXd flat;
    if (model.kind() == RewardKind::linear) {
        flat = features.matrix() * model.params();
    } else {
        flat = forward(layers_of(model), features.matrix()).act.back().col(0);
    }
    return Eigen::Map<const MatrixXd>(flat.data(), features.n_states(), features.n_actions());
}

RewardGradientTensor reward_gradient(const RewardModel& model, const FeatureMap& features) {
    check_dims(model, features);
    RewardGradientTensor out;
    out.n_states = features.n_states();
    out.n_actions = features.n_actions();
    if (model.kind() == RewardKind::linear) {
        out.grad = features.matrix();
        return out;
    }

    const auto layers = layers_of(model);
    const Forward f = forward(layers, features.matrix());
    const Eigen::Index rows = features.matrix().rows();
    out.grad.resize(rows, model.n_params());

    // delta holds d(output)/d(pre-activation) of the current layer, one row per (s,a).
    MatrixXd delta = MatrixXd::Ones(rows, 1);
    for (std::size_t l = layers.size(); l-- > 0;) {
        const auto& layer = layers[l];
        const MatrixXd& input = f.act[l];
        const Eigen::Index n_out = layer.weights.rows();
        const Eigen::Index n_in = layer.weights.cols();
        for (Eigen::Index k = 0; k < n_in; ++k)
            for (Eigen::Index j = 0; j < n_out; ++j)
                out.grad.col(layer.offset + k * n_out + j) = delta.col(j).cwiseProduct(input.col(k));
        out.grad.middleCols(layer.offset + n_out * n_in, n_out) = delta;
        if (l == 0) break;
        MatrixXd back = delta * layer.weights;
        delta = back.cwiseProduct((f.pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
    return out;
}

StepConfig StepConfig::default_for(RewardKind kind) {
    StepConfig c;
    if (kind == RewardKind::mlp) {
        c.kind = OptimizerKind::adam;
        c.rate = 1e-3;
    }
    return c;
}

RewardModel apply_gradient_step(const RewardModel& model, const VectorXd& grad, StepConfig& config) {
    if (grad.size() != model.n_params()) {
        std::ostringstream msg;
        msg << "apply_gradient_step: gradient has " << grad.size() << " entries, model has "
            << model.n_params();
        throw std::invalid_argument(msg.str());
    }
    if (!grad.allFinite()) {
        std::vector<int> bad;
        for (Eigen::Index i = 0; i < grad.size(); ++i)
            if (!std::isfinite(grad[i])) bad.push_back(static_cast<int>(i));
        throw NonFiniteGradient(std::move(bad));
    }

    if (config.kind == OptimizerKind::gradient_ascent)
        return model.with_params(model.params() + config.rate * grad);

    if (config.first_moment.size() != grad.size()) {
        config.first_moment = VectorXd::Zero(grad.size());
        config.second_moment = VectorXd::Zero(grad.size());
        config.step_count = 0;
    }
    ++config.step_count;
    config.first_moment = config.beta1 * config.first_moment + (1.0 - config.beta1) * grad;
    config.second_moment =
        config.beta2 * config.second_moment + (1.0 - config.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(config.step_count));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(config.step_count));
    const VectorXd m_hat = config.first_moment / c1;
    const VectorXd v_hat = config.second_moment / c2;
    const VectorXd step =
        (m_hat.array() / (v_hat.array().sqrt() + config.epsilon)).matrix() * config.rate;
    return model.with_params(model.params() + step);
}

}  // namespace irl
