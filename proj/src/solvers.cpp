#include "irl/solvers.hpp"

#include "irl/errors.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace irl {

namespace {

void check_reward(const TabularMDP& mdp, const MatrixXd& reward, const char* who) {
    if (reward.rows() != mdp.n_states() || reward.cols() != mdp.n_actions()) {
        std::ostringstream msg;
        msg << who << ": reward is " << reward.rows() << "x" << reward.cols() << ", MDP is "
            << mdp.n_states() << "x" << mdp.n_actions();
        throw std::invalid_argument(msg.str());
    }
}

void check_policy(const TabularMDP& mdp, const StochasticPolicy& policy, const char* who) {
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
        std::ostringstream msg;
        msg << who << ": policy and MDP dimensions differ";
        throw std::invalid_argument(msg.str());
    }
}

// Applies (I - discount * P)^-1 from the left or right, or the truncated
// series sum_{k < terms} P^k when the MDP is undiscounted with a horizon.
class Resolvent {
public:
    Resolvent(const TabularMDP& mdp, MatrixXd p, const SolverOptions& options)
        : discount_(mdp.discount()), p_(std::move(p)), options_(options) {
        if (mdp.discount() == 1.0) {
            horizon_ = *mdp.horizon();
        } else {
            dense_ = p_.rows() <= options.dense_state_limit;
        }
    }

    bool finite() const { return horizon_ > 0; }
    int horizon() const { return horizon_; }

    // (I - gP)^-1 B
    MatrixXd right(const MatrixXd& b, int terms) const {
        if (finite()) {
            MatrixXd acc = MatrixXd::Zero(b.rows(), b.cols());
            MatrixXd term = b;
            for (int k = 0; k < terms; ++k) {
                acc += term;
                if (k + 1 < terms) term = p_ * term;
            }
            return acc;
        }
        if (dense_) return factor(lu_, false).solve(b);
        MatrixXd x = b;
        iterate(x, [&](const MatrixXd& cur) { return MatrixXd(b + discount_ * (p_ * cur)); });
        return x;
    }

    // B (I - gP)^-1
    MatrixXd left(const MatrixXd& b, int terms) const {
        if (finite()) {
            MatrixXd acc = MatrixXd::Zero(b.rows(), b.cols());
            MatrixXd term = b;
            for (int k = 0; k < terms; ++k) {
                acc += term;
                if (k + 1 < terms) term = term * p_;
            }
            return acc;
        }
        if (dense_) return factor(lu_t_, true).solve(b.transpose()).transpose();
        MatrixXd x = b;
        iterate(x, [&](const MatrixXd& cur) { return MatrixXd(b + discount_ * (cur * p_)); });
        return x;
    }

private:
    // Factorizes (I - gP) or its transpose on first use; every right-hand
    // side for that side of the product then reuses it.
    const Eigen::PartialPivLU<MatrixXd>& factor(std::optional<Eigen::PartialPivLU<MatrixXd>>& lu,
                                                bool transposed) const {
        if (!lu) {
            MatrixXd a = MatrixXd::Identity(p_.rows(), p_.cols()) - discount_ * p_;
            if (transposed) a.transposeInPlace();
            lu.emplace(a);
        }
        return *lu;
    }

    template <typename Step>
    void iterate(MatrixXd& x, Step step) const {
        double residual = 0.0;
        for (long it = 0; it < options_.max_iters; ++it) {
            MatrixXd next = step(x);
            residual = (next - x).cwiseAbs().maxCoeff();
            x.swap(next);
            if (residual <= options_.tol) return;
        }
        throw ConvergenceError("fixed-point linear solve did not converge", residual,
                               options_.max_iters);
    }

    double discount_;
    MatrixXd p_;
    SolverOptions options_;
    mutable std::optional<Eigen::PartialPivLU<MatrixXd>> lu_;
    mutable std::optional<Eigen::PartialPivLU<MatrixXd>> lu_t_;
    bool dense_ = false;
    int horizon_ = 0;
};

MatrixXd soft_backup(const TabularMDP& mdp, const MatrixXd& reward, const VectorXd& v) {
    MatrixXd q(reward.rows(), reward.cols());
    for (int a = 0; a < mdp.n_actions(); ++a)
        q.col(a) = reward.col(a) + mdp.discount() * (mdp.transition(a) * v);
    return q;
}

}  // namespace

VectorXd log_sum_exp_rows(const MatrixXd& q) {
    VectorXd out(q.rows());
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
        const double m = q.row(s).maxCoeff();
        out[s] = m + std::log((q.row(s).array() - m).exp().sum());
    }
    return out;
}

SoftValueTable soft_value_iteration(const TabularMDP& mdp, const MatrixXd& reward,
                                    const SolverOptions& options) {
    check_reward(mdp, reward, "soft_value_iteration");
    if (!(options.tol > 0.0)) throw std::invalid_argument("soft_value_iteration: tol must be > 0");

    SoftValueTable out;
    out.discount = mdp.discount();
    if (mdp.discount() == 1.0) {
        MatrixXd q = reward;
        for (int k = 1; k < *mdp.horizon(); ++k) q = soft_backup(mdp, reward, log_sum_exp_rows(q));
        out.q = std::move(q);
        out.iterations = *mdp.horizon() - 1;
        return out;
    }

    MatrixXd q = options.warm_start ? *options.warm_start : reward;
    if (q.rows() != reward.rows() || q.cols() != reward.cols())
        throw std::invalid_argument("soft_value_iteration: warm start has wrong shape");
    double residual = std::numeric_limits<double>::infinity();
    long it = 0;
    while (it < options.max_iters) {
        MatrixXd next = soft_backup(mdp, reward, log_sum_exp_rows(q));
        residual = (next - q).cwiseAbs().maxCoeff();
        q.swap(next);
        ++it;
        if (residual <= options.tol) break;
    }
    if (residual > options.tol)
        throw ConvergenceError("soft_value_iteration did not converge", residual, it);
    out.q = std::move(q);
    out.iterations = it;
    out.residual = residual;
    return out;
}

VectorXd expected_reward_entropy(const MatrixXd& reward, const StochasticPolicy& policy) {
    const MatrixXd& p = policy.probs();
    VectorXd out = VectorXd::Zero(p.rows());
    for (Eigen::Index s = 0; s < p.rows(); ++s)
        for (Eigen::Index a = 0; a < p.cols(); ++a) {
            const double pa = p(s, a);
            if (pa > 0.0) out[s] += pa * (reward(s, a) - std::log(pa));
        }
    return out;
}

MatrixXd soft_value_from_occupancy(const OccupancyTables& occ, const MatrixXd& reward,
                                   const StochasticPolicy& policy) {
    if (occ.cond_occ.size() != static_cast<std::size_t>(reward.cols()))
        throw std::invalid_argument("soft_value_from_occupancy: missing conditional occupancy");
    const VectorXd l = expected_reward_entropy(reward, policy);
    MatrixXd q(reward.rows(), reward.cols());
    for (Eigen::Index a = 0; a < reward.cols(); ++a)
        q.col(a) = reward.col(a) + occ.discount * (occ.cond_occ[static_cast<std::size_t>(a)] * l);
    return q;
}

SoftValueTable soft_policy_evaluation(const TabularMDP& mdp, const MatrixXd& reward,
                                      const StochasticPolicy& policy, const SolverOptions& options) {
    check_reward(mdp, reward, "soft_policy_evaluation");
    check_policy(mdp, policy, "soft_policy_evaluation");
    const OccupancyTables occ = occupancy_conditional(mdp, policy, options);
    SoftValueTable out;
    out.q = soft_value_from_occupancy(occ, reward, policy);
    out.under_policy = policy;
    out.discount = mdp.discount();
    return out;
}

OccupancyTables occupancy_state(const TabularMDP& mdp, const StochasticPolicy& policy,
                                const SolverOptions& options) {
    check_policy(mdp, policy, "occupancy_state");
    const Resolvent solve(mdp, policy_transition_matrix(mdp, policy), options);
    OccupancyTables out;
    out.discount = mdp.discount();
    const MatrixXd p0 = mdp.initial_dist().transpose();
    out.state_occ = solve.left(p0, solve.horizon()).transpose();
    return out;
}

OccupancyTables occupancy_conditional(const TabularMDP& mdp, const StochasticPolicy& policy,
                                      const SolverOptions& options) {
    check_policy(mdp, policy, "occupancy_conditional");
    const Resolvent solve(mdp, policy_transition_matrix(mdp, policy), options);
    OccupancyTables out;
    out.discount = mdp.discount();
    out.cond_occ.reserve(static_cast<std::size_t>(mdp.n_actions()));
    for (int a = 0; a < mdp.n_actions(); ++a)
        out.cond_occ.push_back(solve.left(mdp.transition(a), solve.horizon() - 1));
    return out;
}

MatrixXd value_iteration(const TabularMDP& mdp, const MatrixXd& reward, const SolverOptions& options) {
    check_reward(mdp, reward, "value_iteration");
    auto backup = [&](const MatrixXd& q) {
        const VectorXd v = q.rowwise().maxCoeff();
        MatrixXd next(q.rows(), q.cols());
        for (int a = 0; a < mdp.n_actions(); ++a)
            next.col(a) = reward.col(a) + mdp.discount() * (mdp.transition(a) * v);
        return next;
    };
    MatrixXd q = reward;
    if (mdp.discount() == 1.0) {
        for (int k = 1; k < *mdp.horizon(); ++k) q = backup(q);
        return q;
    }
    double residual = std::numeric_limits<double>::infinity();
    long it = 0;
    while (it < options.max_iters) {
        MatrixXd next = backup(q);
        residual = (next - q).cwiseAbs().maxCoeff();
        q.swap(next);
        ++it;
        if (residual <= options.tol) return q;
    }
    throw ConvergenceError("value_iteration did not converge", residual, it);
}

std::vector<int> greedy_actions(const MatrixXd& q) {
    std::vector<int> out(static_cast<std::size_t>(q.rows()));
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
        int best = 0;
        for (Eigen::Index a = 1; a < q.cols(); ++a)
            if (q(s, a) > q(s, best)) best = static_cast<int>(a);
        out[static_cast<std::size_t>(s)] = best;
    }
    return out;
}

VectorXd policy_evaluation(const TabularMDP& mdp, const MatrixXd& reward,
                           const StochasticPolicy& policy, const SolverOptions& options) {
    check_reward(mdp, reward, "policy_evaluation");
    check_policy(mdp, policy, "policy_evaluation");
    const Resolvent solve(mdp, policy_transition_matrix(mdp, policy), options);
    const VectorXd r_pi = policy.probs().cwiseProduct(reward).rowwise().sum();
    return solve.right(r_pi, solve.horizon());
}

}  // namespace irl
