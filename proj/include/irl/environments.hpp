#pragma once

#include "irl/estimators.hpp"
#include "irl/mdp.hpp"
#include "irl/reward.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace irl {

struct Cell {
    int row = 0;
    int col = 0;
    bool operator==(const Cell&) const = default;
};

/// Grid moves. The first four are always present; `stay` is the fifth when enabled.
enum class Move { up, down, left, right, stay };

/// A built benchmark: MDP, features, and the true reward it was designed around.
struct Environment {
    std::string name;
    TabularMDP mdp;
    FeatureMap features;
    MatrixXd true_reward;
    std::optional<VectorXd> true_theta;
    int grid_width = 0;
    int grid_height = 0;
    int horizon = 64;
};

struct ObstacleworldSpec {
    int width = 10;
    int height = 10;
    std::vector<Cell> obstacles;
    Cell goal{9, 9};
    /// Fixed start cell; unset starts uniformly over all cells.
    std::optional<Cell> start;
    /// Weights over (path, obstacle, goal) indicator features.
    VectorXd true_theta = (VectorXd(3) << 0.2, 0.0, 1.0).finished();
    bool stay_action = true;
    double discount = 0.95;
    int horizon = 64;

    /// 10x10 layout with a clear main diagonal and scattered obstacle blocks,
    /// starting in the top-left corner with the goal bottom-right.
    static ObstacleworldSpec default_layout();
};

Environment build_obstacleworld(const ObstacleworldSpec& spec);

enum class DistanceMetric { chebyshev, euclidean };

struct ObjectworldSpec {
    int grid = 16;
    int colors = 4;
    int n_objects = 0;  ///< 0 selects grid * grid / 10 (at least `colors`).
    double slip = 0.3;
    DistanceMetric metric = DistanceMetric::chebyshev;
    /// Reward +1 within outer_radius_a of outer colour 0 and within
    /// outer_radius_b of outer colour 1, -1 within outer_radius_a only.
    double outer_radius_a = 3.0;
    double outer_radius_b = 2.0;
    double discount = 0.9;
    int horizon = 64;
};

struct ObjectPlacement {
    Cell cell;
    int inner_color = 0;
    int outer_color = 0;
};

/// Builds the grid, places objects, and computes 2C distance features
/// (x_{2i} inner colour i, x_{2i+1} outer colour i).
Environment build_objectworld(const ObjectworldSpec& spec, std::uint64_t seed,
                              std::vector<ObjectPlacement>* placements_out = nullptr);
/// Same construction with explicit object placements.
Environment build_objectworld(const ObjectworldSpec& spec, const std::vector<ObjectPlacement>& placements);

struct MountainCarSpec {
    int position_bins = 100;
    int velocity_bins = 100;
    double position_min = -1.2;
    double position_max = 0.6;
    double velocity_min = -0.07;
    double velocity_max = 0.07;
    /// Kernel bandwidths in bin widths.
    double position_bandwidth = 1.0;
    double velocity_bandwidth = 1.0;
    double goal_position = 0.5;
    double discount = 0.99;
    int horizon = 200;
    int n_actions = 3;
};

struct ContinuousTransition {
    double position = 0.0;
    double velocity = 0.0;
    int action = 0;
    double next_position = 0.0;
    double next_velocity = 0.0;
};

/// Discretizes a kernel estimate of T(s'|s,a) from continuous transitions
/// onto the spec's position/velocity grid. Features are one-hot states and the
/// true reward is the negated distance to the goal position.
Environment build_mountaincar(const MountainCarSpec& spec, const std::vector<ContinuousTransition>& source);

/// Rolls out the standard mountain-car dynamics under uniformly random
/// actions to produce source transitions for build_mountaincar.
std::vector<ContinuousTransition> simulate_mountaincar(const MountainCarSpec& spec, int episodes,
                                                       int steps, std::uint64_t seed);

enum class ExpertKind { soft_optimal, epsilon_noisy_optimal };

std::string to_string(ExpertKind kind);
ExpertKind expert_kind_from_string(const std::string& name);

/// Softmax of Q*, or the hard-optimal policy mixed with uniform noise.
StochasticPolicy expert_policy(const TabularMDP& mdp, const MatrixXd& true_reward, ExpertKind kind,
                               double epsilon = 0.3);

/// Trajectory i is sampled with seed derived from (seed, i).
Dataset generate_expert(const TabularMDP& mdp, const MatrixXd& true_reward, ExpertKind kind, int n_traj,
                        int horizon, std::uint64_t seed, double epsilon = 0.3);

/// True where an expert policy estimate is available.
using PartialPolicyMask = std::vector<bool>;

/// Masked-out states get the uniform fallback and are marked unvisited.
ExpertEstimate apply_partial_mask(ExpertEstimate estimate, const PartialPolicyMask& mask);

/// False on the main diagonal (row == col).
PartialPolicyMask corridor_mask(int width, int height);
/// False strictly below the main diagonal (row > col).
PartialPolicyMask below_diagonal_mask(int width, int height);

inline int cell_index(const Cell& c, int width) { return c.row * width + c.col; }

}  // namespace irl
