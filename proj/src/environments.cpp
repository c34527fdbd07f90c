#include "irl/environments.hpp"

#include "irl/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace irl {

namespace {

int move_count(bool stay) { return stay ? 5 : 4; }

Cell apply_move(const Cell& c, Move m, int width, int height) {
    Cell out = c;
    switch (m) {
        case Move::up: out.row = std::max(0, c.row - 1); break;
        case Move::down: out.row = std::min(height - 1, c.row + 1); break;
        case Move::left: out.col = std::max(0, c.col - 1); break;
        case Move::right: out.col = std::min(width - 1, c.col + 1); break;
        case Move::stay: break;
    }
    return out;
}

// Intended move with probability 1 - slip; otherwise a uniformly random
// neighbouring cell (moves into the boundary leave the agent in place).
std::vector<MatrixXd> grid_transitions(int width, int height, bool stay, double slip) {
    const int ns = width * height;
    const int na = move_count(stay);
    std::vector<MatrixXd> t(static_cast<std::size_t>(na), MatrixXd::Zero(ns, ns));
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
            const Cell cell{r, c};
            const int s = cell_index(cell, width);
            for (int a = 0; a < na; ++a) {
                auto& m = t[static_cast<std::size_t>(a)];
                m(s, cell_index(apply_move(cell, static_cast<Move>(a), width, height), width)) += 1.0 - slip;
                for (int k = 0; k < 4; ++k)
                    m(s, cell_index(apply_move(cell, static_cast<Move>(k), width, height), width)) += slip / 4.0;
            }
        }
    return t;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

ObstacleworldSpec ObstacleworldSpec::default_layout() {
    ObstacleworldSpec spec;
    spec.obstacles = {{0, 4}, {0, 5}, {1, 4}, {1, 5}, {1, 8}, {2, 6}, {2, 7}, {2, 8}, {3, 0}, {3, 1},
                      {4, 1}, {4, 2}, {4, 7}, {5, 7}, {5, 8}, {6, 2}, {6, 3}, {6, 4}, {7, 0}, {7, 4},
                      {8, 5}, {8, 6}, {9, 2}, {9, 6}, {9, 7}};
    spec.start = Cell{0, 0};
    return spec;
}

Environment build_obstacleworld(const ObstacleworldSpec& spec) {
    if (spec.width < 1 || spec.height < 1) throw std::invalid_argument("obstacleworld: empty grid");
    auto in_grid = [&](const Cell& c) {
        return c.row >= 0 && c.row < spec.height && c.col >= 0 && c.col < spec.width;
    };
    if (!in_grid(spec.goal)) throw std::invalid_argument("obstacleworld: goal outside the grid");
    if (spec.true_theta.size() != 3) throw std::invalid_argument("obstacleworld: true theta must have 3 entries");
    const int ns = spec.width * spec.height;
    const int na = move_count(spec.stay_action);

    MatrixXd state_features = MatrixXd::Zero(ns, 3);
    state_features.col(0).setOnes();
    for (const auto& o : spec.obstacles) {
        if (!in_grid(o)) throw std::invalid_argument("obstacleworld: obstacle outside the grid");
        if (o == spec.goal) throw std::invalid_argument("obstacleworld: goal inside obstacle set");
        const int s = cell_index(o, spec.width);
        state_features(s, 0) = 0.0;
        state_features(s, 1) = 1.0;
    }
    const int g = cell_index(spec.goal, spec.width);
    state_features.row(g) << 0.0, 0.0, 1.0;

    VectorXd initial = VectorXd::Constant(ns, 1.0 / ns);
    if (spec.start) {
        if (!in_grid(*spec.start)) throw std::invalid_argument("obstacleworld: start outside the grid");
        initial.setZero();
        initial[cell_index(*spec.start, spec.width)] = 1.0;
    }
    TabularMDP mdp(grid_transitions(spec.width, spec.height, spec.stay_action, 0.0), std::move(initial),
                   spec.discount);
    FeatureMap features = FeatureMap::from_state_features(state_features, na);
    MatrixXd reward = reward_table(RewardModel::linear(spec.true_theta), features);
    return Environment{"obstacleworld", std::move(mdp), std::move(features), std::move(reward),
                       spec.true_theta, spec.width, spec.height, spec.horizon};
}

namespace {

double cell_distance(const Cell& a, const Cell& b, DistanceMetric metric) {
    const double dr = std::abs(a.row - b.row);
    const double dc = std::abs(a.col - b.col);
    return metric == DistanceMetric::chebyshev ? std::max(dr, dc) : std::hypot(dr, dc);
}

}  // namespace

Environment build_objectworld(const ObjectworldSpec& spec, const std::vector<ObjectPlacement>& placements) {
    if (spec.grid < 1) throw std::invalid_argument("objectworld: empty grid");
    if (spec.colors < 2) throw std::invalid_argument("objectworld: at least 2 colours are required");
    if (!(spec.slip >= 0.0 && spec.slip <= 1.0)) throw std::invalid_argument("objectworld: slip must lie in [0, 1]");
    if (static_cast<int>(placements.size()) < spec.colors) {
        std::ostringstream msg;
        msg << "objectworld: " << spec.colors << " colours requested but only " << placements.size()
            << " objects placed";
        throw std::invalid_argument(msg.str());
    }
    const int n = spec.grid;
    const int ns = n * n;
    const int d = 2 * spec.colors;
    const double diameter = spec.metric == DistanceMetric::chebyshev ? n - 1 : std::sqrt(2.0) * (n - 1);

    MatrixXd state_features = MatrixXd::Constant(ns, d, diameter);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            const Cell cell{r, c};
            const int s = cell_index(cell, n);
            for (const auto& obj : placements) {
                if (obj.inner_color < 0 || obj.inner_color >= spec.colors || obj.outer_color < 0 ||
                    obj.outer_color >= spec.colors)
                    throw std::invalid_argument("objectworld: object colour out of range");
                const double dist = cell_distance(cell, obj.cell, spec.metric);
                auto& inner = state_features(s, 2 * obj.inner_color);
                auto& outer = state_features(s, 2 * obj.outer_color + 1);
                inner = std::min(inner, dist);
                outer = std::min(outer, dist);
            }
        }

    VectorXd state_reward = VectorXd::Zero(ns);
    for (int s = 0; s < ns; ++s) {
        const bool near_a = state_features(s, 1) <= spec.outer_radius_a;
        const bool near_b = state_features(s, 3) <= spec.outer_radius_b;
        if (near_a && near_b)
            state_reward[s] = 1.0;
        else if (near_a)
            state_reward[s] = -1.0;
    }

    const int na = move_count(true);
    TabularMDP mdp(grid_transitions(n, n, true, spec.slip), VectorXd::Constant(ns, 1.0 / ns), spec.discount);
    MatrixXd reward = state_reward.replicate(1, na);
    return Environment{"objectworld", std::move(mdp), FeatureMap::from_state_features(state_features, na),
                       std::move(reward), std::nullopt, n, n, spec.horizon};
}

Environment build_objectworld(const ObjectworldSpec& spec, std::uint64_t seed,
                              std::vector<ObjectPlacement>* placements_out) {
    const int ns = spec.grid * spec.grid;
    const int n_objects = spec.n_objects > 0 ? spec.n_objects : std::max(spec.colors, ns / 10);
    if (n_objects > ns) throw std::invalid_argument("objectworld: more objects than cells");
    if (spec.colors > n_objects) {
        std::ostringstream msg;
        msg << "objectworld: " << spec.colors << " colours requested but only " << n_objects << " objects placed";
        throw std::invalid_argument(msg.str());
    }

    std::mt19937_64 rng(seed);
    std::vector<int> cells(static_cast<std::size_t>(ns));
    for (int i = 0; i < ns; ++i) cells[static_cast<std::size_t>(i)] = i;
    std::shuffle(cells.begin(), cells.end(), rng);
    std::uniform_int_distribution<int> color(0, spec.colors - 1);

    std::vector<ObjectPlacement> placements;
    for (int k = 0; k < n_objects; ++k) {
        const int s = cells[static_cast<std::size_t>(k)];
        ObjectPlacement p{{s / spec.grid, s % spec.grid}, color(rng), color(rng)};
        // The first objects cycle through the outer colours so every colour exists.
        if (k < spec.colors) p.outer_color = k;
        placements.push_back(p);
    }
    Environment env = build_objectworld(spec, placements);
    if (placements_out) *placements_out = std::move(placements);
    return env;
}

Environment build_mountaincar(const MountainCarSpec& spec, const std::vector<ContinuousTransition>& source) {
    if (spec.position_bins < 2 || spec.velocity_bins < 2)
        throw std::invalid_argument("mountaincar: at least 2 bins per dimension are required");
    const int np = spec.position_bins;
    const int nv = spec.velocity_bins;
    const int ns = np * nv;
    const int na = spec.n_actions;
    const double pw = (spec.position_max - spec.position_min) / np;
    const double vw = (spec.velocity_max - spec.velocity_min) / nv;
    const double sp = spec.position_bandwidth * pw;
    const double sv = spec.velocity_bandwidth * vw;

    VectorXd pos(ns), vel(ns);
    for (int i = 0; i < np; ++i)
        for (int j = 0; j < nv; ++j) {
            pos[i * nv + j] = spec.position_min + (i + 0.5) * pw;
            vel[i * nv + j] = spec.velocity_min + (j + 0.5) * vw;
        }

    std::vector<std::vector<const ContinuousTransition*>> by_action(static_cast<std::size_t>(na));
    for (const auto& tr : source) {
        if (tr.action < 0 || tr.action >= na) throw std::invalid_argument("mountaincar: source action out of range");
        by_action[static_cast<std::size_t>(tr.action)].push_back(&tr);
    }
    std::vector<int> missing;
    for (int a = 0; a < na; ++a)
        if (by_action[static_cast<std::size_t>(a)].empty()) missing.push_back(a);
    if (!missing.empty()) {
        std::ostringstream msg;
        msg << "mountaincar: no source transitions for action(s)";
        for (int a : missing) msg << ' ' << a;
        throw std::invalid_argument(msg.str());
    }

    // Squared kernel exponent between grid states and points.
    auto log_kernel = [&](const VectorXd& px, const VectorXd& pv) {
        MatrixXd out(ns, px.size());
        for (Eigen::Index i = 0; i < px.size(); ++i)
            out.col(i) = -0.5 * (((pos.array() - px[i]) / sp).square() + ((vel.array() - pv[i]) / sv).square());
        return out;
    };
    // Row-wise softmax: weights proportional to exp(log k), robust to underflow.
    auto normalize_rows_exp = [](MatrixXd m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            const double mx = m.row(r).maxCoeff();
            m.row(r) = (m.row(r).array() - mx).exp();
            m.row(r) /= m.row(r).sum();
        }
        return m;
    };

    std::vector<MatrixXd> transitions;
    for (int a = 0; a < na; ++a) {
        const auto& pts = by_action[static_cast<std::size_t>(a)];
        const auto m = static_cast<Eigen::Index>(pts.size());
        VectorXd x(m), v(m), nx(m), nvv(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            x[i] = pts[static_cast<std::size_t>(i)]->position;
            v[i] = pts[static_cast<std::size_t>(i)]->velocity;
            nx[i] = pts[static_cast<std::size_t>(i)]->next_position;
            nvv[i] = pts[static_cast<std::size_t>(i)]->next_velocity;
        }
        // phi weights over source points for each grid state; psi bumps over
        // grid states for each source point, each normalized to sum to one.
        const MatrixXd phi = normalize_rows_exp(log_kernel(x, v));
        const MatrixXd psi = normalize_rows_exp(log_kernel(nx, nvv).transpose());
        MatrixXd t = phi * psi;
        for (Eigen::Index r = 0; r < t.rows(); ++r) t.row(r) /= t.row(r).sum();
        transitions.push_back(std::move(t));
    }

    VectorXd initial = VectorXd::Zero(ns);
    for (int s = 0; s < ns; ++s)
        if (pos[s] >= -0.6 && pos[s] <= -0.4 && std::abs(vel[s]) <= 0.5 * vw + 1e-12) initial[s] = 1.0;
    if (initial.sum() == 0.0) {
        // Coarse grids: nearest state to the centre of the start region.
        Eigen::Index best = 0;
        ((pos.array() + 0.5).square() / (pw * pw) + vel.array().square() / (vw * vw)).minCoeff(&best);
        initial[best] = 1.0;
    }
    initial /= initial.sum();

    TabularMDP mdp(std::move(transitions), std::move(initial), spec.discount);
    std::vector<bool> terminal(static_cast<std::size_t>(ns));
    for (int s = 0; s < ns; ++s) terminal[static_cast<std::size_t>(s)] = pos[s] >= spec.goal_position;
    mdp.set_terminal_states(std::move(terminal));

    const VectorXd state_reward = -(pos.array() - spec.goal_position).abs().matrix();
    MatrixXd reward = state_reward.replicate(1, na);
    return Environment{"mountaincar", std::move(mdp), FeatureMap::one_hot_states(ns, na), std::move(reward),
                       state_reward, np, nv, spec.horizon};
}

std::vector<ContinuousTransition> simulate_mountaincar(const MountainCarSpec& spec, int episodes, int steps,
                                                       std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> px(spec.position_min, spec.position_max);
    std::uniform_real_distribution<double> pv(spec.velocity_min, spec.velocity_max);
    std::uniform_int_distribution<int> act(0, spec.n_actions - 1);
    std::vector<ContinuousTransition> out;
    out.reserve(static_cast<std::size_t>(episodes) * steps);
    for (int e = 0; e < episodes; ++e) {
        double x = px(rng);
        double v = pv(rng);
        for (int t = 0; t < steps; ++t) {
            const int a = act(rng);
            double nv = v + (a - 1) * 0.001 - 0.0025 * std::cos(3.0 * x);
            nv = std::clamp(nv, spec.velocity_min, spec.velocity_max);
            double nx = std::clamp(x + nv, spec.position_min, spec.position_max);
            if (nx == spec.position_min && nv < 0.0) nv = 0.0;
            out.push_back({x, v, a, nx, nv});
            x = nx;
            v = nv;
            if (x >= spec.goal_position) break;
        }
    }
    return out;
}

std::string to_string(ExpertKind kind) {
    return kind == ExpertKind::soft_optimal ? "soft_optimal" : "epsilon_noisy_optimal";
}

ExpertKind expert_kind_from_string(const std::string& name) {
    if (name == "soft_optimal") return ExpertKind::soft_optimal;
    if (name == "epsilon_noisy_optimal") return ExpertKind::epsilon_noisy_optimal;
    throw std::invalid_argument("unknown expert kind '" + name + "'");
}

StochasticPolicy expert_policy(const TabularMDP& mdp, const MatrixXd& true_reward, ExpertKind kind,
                               double epsilon) {
    if (kind == ExpertKind::soft_optimal)
        return StochasticPolicy::softmax(soft_value_iteration(mdp, true_reward).q);
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("expert_policy: epsilon must lie in [0, 1]");
    const auto greedy = greedy_actions(value_iteration(mdp, true_reward));
    MatrixXd p = MatrixXd::Constant(mdp.n_states(), mdp.n_actions(), epsilon / mdp.n_actions());
    for (int s = 0; s < mdp.n_states(); ++s) p(s, greedy[static_cast<std::size_t>(s)]) += 1.0 - epsilon;
    return StochasticPolicy(std::move(p));
}

Dataset generate_expert(const TabularMDP& mdp, const MatrixXd& true_reward, ExpertKind kind, int n_traj,
                        int horizon, std::uint64_t seed, double epsilon) {
    if (n_traj < 1) throw std::invalid_argument("generate_expert: n_traj must be >= 1");
    const StochasticPolicy policy = expert_policy(mdp, true_reward, kind, epsilon);
    Dataset data;
    data.metadata.seed = seed;
    data.metadata.generator = to_string(kind);
    for (int i = 0; i < n_traj; ++i)
        data.trajectories.push_back(sample_trajectory(mdp, policy, horizon, mix_seed(seed, static_cast<std::uint64_t>(i))));
    return data;
}

ExpertEstimate apply_partial_mask(ExpertEstimate estimate, const PartialPolicyMask& mask) {
    const int ns = estimate.policy.n_states();
    const int na = estimate.policy.n_actions();
    if (static_cast<int>(mask.size()) != ns) throw std::invalid_argument("apply_partial_mask: mask size mismatch");
    MatrixXd p = estimate.policy.probs();
    for (int s = 0; s < ns; ++s) {
        if (mask[static_cast<std::size_t>(s)]) continue;
        p.row(s).setConstant(1.0 / na);
        estimate.visited[static_cast<std::size_t>(s)] = false;
    }
    estimate.policy = StochasticPolicy(std::move(p));
    return estimate;
}

PartialPolicyMask corridor_mask(int width, int height) {
    PartialPolicyMask mask(static_cast<std::size_t>(width * height), true);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c)
            if (r == c) mask[static_cast<std::size_t>(cell_index({r, c}, width))] = false;
    return mask;
}

PartialPolicyMask below_diagonal_mask(int width, int height) {
    PartialPolicyMask mask(static_cast<std::size_t>(width * height), true);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c)
            if (r > c) mask[static_cast<std::size_t>(cell_index({r, c}, width))] = false;
    return mask;
}

}  // namespace irl
