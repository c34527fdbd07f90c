#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace irl {

/// An iterative solver hit its iteration cap.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual, long iterations)
        : std::runtime_error(what + " (residual " + std::to_string(residual) + " after " +
                             std::to_string(iterations) + " iterations)"),
          residual_(residual),
          iterations_(iterations) {}

    double residual() const { return residual_; }
    long iterations() const { return iterations_; }

private:
    double residual_;
    long iterations_;
};

/// A gradient contained NaN or infinite entries.
class NonFiniteGradient : public std::runtime_error {
public:
    explicit NonFiniteGradient(std::vector<int> indices)
        : std::runtime_error(describe(indices)), indices_(std::move(indices)) {}

    const std::vector<int>& indices() const { return indices_; }

private:
    static std::string describe(const std::vector<int>& indices) {
        std::string msg = "non-finite gradient at indices [";
        for (std::size_t i = 0; i < indices.size() && i < 16; ++i) {
            if (i) msg += ", ";
            msg += std::to_string(indices[i]);
        }
        if (indices.size() > 16) msg += ", ...";
        return msg + "]";
    }

    std::vector<int> indices_;
};

}  // namespace irl
