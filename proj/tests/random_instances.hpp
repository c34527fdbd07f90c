#pragma once

#include "irl/mdp.hpp"
#include "irl/reward.hpp"

#include <random>
#include <vector>

namespace irl::testing {

inline MatrixXd random_stochastic_rows(int rows, int cols, std::mt19937_64& rng, double floor = 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) m(r, c) = floor + u(rng);
        m.row(r) /= m.row(r).sum();
    }
    return m;
}

inline TabularMDP random_mdp(int ns, int na, double discount, std::mt19937_64& rng) {
    std::vector<MatrixXd> t;
    for (int a = 0; a < na; ++a) t.push_back(random_stochastic_rows(ns, ns, rng));
    VectorXd p0 = random_stochastic_rows(1, ns, rng).row(0).transpose();
    return TabularMDP(std::move(t), std::move(p0), discount);
}

inline StochasticPolicy random_policy(int ns, int na, std::mt19937_64& rng) {
    return StochasticPolicy(random_stochastic_rows(ns, na, rng, 0.05));
}

inline VectorXd random_vector(int n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = g(rng);
    return v;
}

inline MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = g(rng);
    return m;
}

inline FeatureMap random_features(int ns, int na, int dim, std::mt19937_64& rng) {
    return FeatureMap(random_matrix(ns * na, dim, rng), ns, na);
}

/// Sum_{t < terms} discount^t p0 P^t, the occupancy oracle.
inline VectorXd power_series_occupancy(const VectorXd& p0, const MatrixXd& p, double discount, int terms) {
    VectorXd acc = VectorXd::Zero(p0.size());
    Eigen::RowVectorXd term = p0.transpose();
    double g = 1.0;
    for (int t = 0; t < terms; ++t) {
        acc += g * term.transpose();
        term = term * p;
        g *= discount;
    }
    return acc;
}

}  // namespace irl::testing
