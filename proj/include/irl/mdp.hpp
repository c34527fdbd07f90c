#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace irl {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::RowVectorXd;

/// Tolerance for row-stochastic checks.
inline constexpr double kProbTol = 1e-12;
/// Rows within this distance of 1 are renormalized on construction.
inline constexpr double kNormalizeTol = 1e-9;

/**
 * Finite Markov decision process with a dense transition tensor.
 *
 * Transitions are stored per action: transition(a)(s, s') = T(s'|s,a).
 * When the discount is 1 the process must carry a finite horizon; all
 * value and occupancy computations then use horizon-step sums instead of
 * linear solves.
 */
class TabularMDP {
public:
    TabularMDP(std::vector<MatrixXd> transitions, VectorXd initial_dist, double discount,
               std::optional<int> horizon = std::nullopt);

    int n_states() const { return static_cast<int>(initial_.size()); }
    int n_actions() const { return static_cast<int>(transitions_.size()); }
    double discount() const { return discount_; }
    std::optional<int> horizon() const { return horizon_; }
    bool finite_horizon() const { return horizon_.has_value(); }

    const MatrixXd& transition(int action) const { return transitions_[action]; }
    const std::vector<MatrixXd>& transitions() const { return transitions_; }
    const VectorXd& initial_dist() const { return initial_; }

    double prob(int s, int a, int next) const { return transitions_[a](s, next); }

    /// States at which sampling stops. Empty by default.
    const std::vector<bool>& terminal_states() const { return terminal_; }
    void set_terminal_states(std::vector<bool> terminal);

    TabularMDP with_initial_dist(VectorXd initial_dist) const;
    TabularMDP with_discount(double discount, std::optional<int> horizon = std::nullopt) const;

private:
    std::vector<MatrixXd> transitions_;
    VectorXd initial_;
    double discount_;
    std::optional<int> horizon_;
    std::vector<bool> terminal_;
};

/// Per-state action distribution pi(a|s), rows indexed by state.
class StochasticPolicy {
public:
    explicit StochasticPolicy(MatrixXd probs);

    static StochasticPolicy uniform(int n_states, int n_actions);
    /// One-hot rows selecting actions[s].
    static StochasticPolicy deterministic(const std::vector<int>& actions, int n_actions);
    /// Row-wise softmax of a Q table, computed with max subtraction.
    static StochasticPolicy softmax(const MatrixXd& q);

    int n_states() const { return static_cast<int>(probs_.rows()); }
    int n_actions() const { return static_cast<int>(probs_.cols()); }
    const MatrixXd& probs() const { return probs_; }
    double operator()(int s, int a) const { return probs_(s, a); }

private:
    MatrixXd probs_;
};

struct Step {
    int state = 0;
    int action = 0;
    bool operator==(const Step&) const = default;
};

struct Trajectory {
    std::vector<Step> steps;
    std::optional<int> terminal;
    bool operator==(const Trajectory&) const = default;
};

struct DatasetMetadata {
    std::string environment;
    std::uint64_t seed = 0;
    std::string generator;
};

struct Dataset {
    std::vector<Trajectory> trajectories;
    DatasetMetadata metadata;

    std::size_t total_steps() const;
};

/// Throws std::invalid_argument when an index is out of range, or when a
/// consecutive transition has zero probability and check_transitions is set.
void validate_dataset(const TabularMDP& mdp, const Dataset& data, bool check_transitions = true);

/// T^pi(s, s') = sum_a pi(a|s) T(s'|s,a).
MatrixXd policy_transition_matrix(const TabularMDP& mdp, const StochasticPolicy& policy);

/// Samples `horizon` steps starting from the initial distribution. Stops early
/// when a terminal state is entered; the state reached after the last action is
/// recorded as the trajectory's terminal.
Trajectory sample_trajectory(const TabularMDP& mdp, const StochasticPolicy& policy, int horizon,
                             std::uint64_t seed);

struct LogLikelihood {
    double value = 0.0;
    /// Set when an observed action has zero probability; value is then -inf.
    bool zero_probability = false;
};

/// Mean over trajectories of sum_t discount^t log pi(a_t|s_t).
LogLikelihood log_likelihood(const StochasticPolicy& policy, const Dataset& data, double discount);

}  // namespace irl
