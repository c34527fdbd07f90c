#include "irl/mdp.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace irl {

namespace {

// Rows within kNormalizeTol of 1 are rescaled; anything further off is an error.
void normalize_rows(MatrixXd& m, const std::string& what) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if ((m.row(r).array() < 0.0).any() || !m.row(r).allFinite()) {
            std::ostringstream msg;
            msg << what << ": row " << r << " has negative or non-finite entries";
            throw std::invalid_argument(msg.str());
        }
        const double sum = m.row(r).sum();
        if (std::abs(sum - 1.0) > kNormalizeTol) {
            std::ostringstream msg;
            msg << what << ": row " << r << " sums to " << sum;
            throw std::invalid_argument(msg.str());
        }
        if (std::abs(sum - 1.0) > kProbTol) m.row(r) /= sum;
    }
}

}  // namespace

TabularMDP::TabularMDP(std::vector<MatrixXd> transitions, VectorXd initial_dist, double discount,
                       std::optional<int> horizon)
    : transitions_(std::move(transitions)),
      initial_(std::move(initial_dist)),
      discount_(discount),
      horizon_(horizon) {
    const auto n = initial_.size();
    if (n == 0) throw std::invalid_argument("TabularMDP: no states");
    if (transitions_.empty()) throw std::invalid_argument("TabularMDP: no actions");
    if (!(discount_ >= 0.0 && discount_ <= 1.0))
        throw std::invalid_argument("TabularMDP: discount must lie in [0, 1]");
    if (discount_ == 1.0 && !horizon_)
        throw std::invalid_argument("TabularMDP: discount 1 requires a finite horizon");
    if (horizon_ && *horizon_ < 1) throw std::invalid_argument("TabularMDP: horizon must be >= 1");

    for (std::size_t a = 0; a < transitions_.size(); ++a) {
        auto& t = transitions_[a];
        if (t.rows() != n || t.cols() != n) {
            std::ostringstream msg;
            msg << "TabularMDP: transition for action " << a << " is " << t.rows() << "x" << t.cols()
                << ", expected " << n << "x" << n;
            throw std::invalid_argument(msg.str());
        }
        normalize_rows(t, "TabularMDP transition[a=" + std::to_string(a) + "]");
    }
    MatrixXd p = initial_.transpose();
    normalize_rows(p, "TabularMDP initial distribution");
    initial_ = p.transpose();
    terminal_.assign(static_cast<std::size_t>(n), false);
}

void TabularMDP::set_terminal_states(std::vector<bool> terminal) {
    if (static_cast<int>(terminal.size()) != n_states())
        throw std::invalid_argument("TabularMDP: terminal flags size mismatch");
    terminal_ = std::move(terminal);
}

TabularMDP TabularMDP::with_initial_dist(VectorXd initial_dist) const {
    TabularMDP out(transitions_, std::move(initial_dist), discount_, horizon_);
    out.terminal_ = terminal_;
    return out;
}

TabularMDP TabularMDP::with_discount(double discount, std::optional<int> horizon) const {
    TabularMDP out(transitions_, initial_, discount, horizon);
    out.terminal_ = terminal_;
    return out;
}

StochasticPolicy::StochasticPolicy(MatrixXd probs) : probs_(std::move(probs)) {
    if (probs_.rows() == 0 || probs_.cols() == 0)
        throw std::invalid_argument("StochasticPolicy: empty matrix");
    normalize_rows(probs_, "StochasticPolicy");
}

StochasticPolicy StochasticPolicy::uniform(int n_states, int n_actions) {
    return StochasticPolicy(MatrixXd::Constant(n_states, n_actions, 1.0 / n_actions));
}

StochasticPolicy StochasticPolicy::deterministic(const std::vector<int>& actions, int n_actions) {
    MatrixXd p = MatrixXd::Zero(static_cast<Eigen::Index>(actions.size()), n_actions);
    for (std::size_t s = 0; s < actions.size(); ++s) {
        if (actions[s] < 0 || actions[s] >= n_actions)
            throw std::invalid_argument("StochasticPolicy: action index out of range");
        p(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
    }
    return StochasticPolicy(std::move(p));
}

StochasticPolicy StochasticPolicy::softmax(const MatrixXd& q) {
    MatrixXd p(q.rows(), q.cols());
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
        const double m = q.row(s).maxCoeff();
        p.row(s) = (q.row(s).array() - m).exp();
        p.row(s) /= p.row(s).sum();
    }
    return StochasticPolicy(std::move(p));
}

std::size_t Dataset::total_steps() const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.steps.size();
    return n;
}

void validate_dataset(const TabularMDP& mdp, const Dataset& data, bool check_transitions) {
    const int ns = mdp.n_states();
    const int na = mdp.n_actions();
    for (std::size_t i = 0; i < data.trajectories.size(); ++i) {
        const auto& traj = data.trajectories[i];
        for (std::size_t t = 0; t < traj.steps.size(); ++t) {
            const auto [s, a] = traj.steps[t];
            if (s < 0 || s >= ns || a < 0 || a >= na) {
                std::ostringstream msg;
                msg << "dataset: trajectory " << i << " step " << t << " (" << s << ", " << a
                    << ") out of range";
                throw std::invalid_argument(msg.str());
            }
            if (!check_transitions) continue;
            std::optional<int> next;
            if (t + 1 < traj.steps.size())
                next = traj.steps[t + 1].state;
            else
                next = traj.terminal;
            if (next && (*next < 0 || *next >= ns)) {
                std::ostringstream msg;
                msg << "dataset: trajectory " << i << " terminal state " << *next << " out of range";
                throw std::invalid_argument(msg.str());
            }
            if (next && !(mdp.prob(s, a, *next) > 0.0)) {
                std::ostringstream msg;
                msg << "dataset: trajectory " << i << " step " << t << " transition " << s << " -> "
                    << *next << " under action " << a << " has zero probability";
                throw std::invalid_argument(msg.str());
            }
        }
    }
}

MatrixXd policy_transition_matrix(const TabularMDP& mdp, const StochasticPolicy& policy) {
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
        throw std::invalid_argument("policy_transition_matrix: policy and MDP dimensions differ");
    MatrixXd out = MatrixXd::Zero(mdp.n_states(), mdp.n_states());
    for (int a = 0; a < mdp.n_actions(); ++a)
        out.noalias() += policy.probs().col(a).asDiagonal() * mdp.transition(a);
    return out;
}

namespace {

int sample_index(const auto& weights, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    double acc = 0.0;
    const int n = static_cast<int>(weights.size());
    int last_positive = 0;
    for (int i = 0; i < n; ++i) {
        if (weights[i] <= 0.0) continue;
        acc += weights[i];
        last_positive = i;
        if (u < acc) return i;
    }
    return last_positive;
}

}  // namespace

Trajectory sample_trajectory(const TabularMDP& mdp, const StochasticPolicy& policy, int horizon,
                             std::uint64_t seed) {
    if (horizon < 1) throw std::invalid_argument("sample_trajectory: horizon must be >= 1");
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
        throw std::invalid_argument("sample_trajectory: policy and MDP dimensions differ");

    std::mt19937_64 rng(seed);
    Trajectory traj;
    traj.steps.reserve(static_cast<std::size_t>(horizon));
    int s = sample_index(mdp.initial_dist(), rng);
    const auto& terminal = mdp.terminal_states();
    for (int t = 0; t < horizon; ++t) {
        const int a = sample_index(policy.probs().row(s), rng);
        traj.steps.push_back({s, a});
        s = sample_index(mdp.transition(a).row(s), rng);
        if (terminal[static_cast<std::size_t>(s)]) break;
    }
    traj.terminal = s;
    return traj;
}

LogLikelihood log_likelihood(const StochasticPolicy& policy, const Dataset& data, double discount) {
    if (data.trajectories.empty()) throw std::invalid_argument("log_likelihood: empty dataset");
    LogLikelihood out;
    double total = 0.0;
    for (const auto& traj : data.trajectories) {
        double weight = 1.0;
        for (const auto& [s, a] : traj.steps) {
            if (s < 0 || s >= policy.n_states() || a < 0 || a >= policy.n_actions())
                throw std::invalid_argument("log_likelihood: step index out of range");
            const double p = policy(s, a);
            if (p <= 0.0) {
                out.zero_probability = true;
                out.value = -std::numeric_limits<double>::infinity();
                return out;
            }
            total += weight * std::log(p);
            weight *= discount;
        }
    }
    out.value = total / static_cast<double>(data.trajectories.size());
    return out;
}

}  // namespace irl
