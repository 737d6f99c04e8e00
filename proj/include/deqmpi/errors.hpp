#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace deqmpi {

/// Dimension or layout mismatch between operands.
struct shape_error : std::runtime_error {
    explicit shape_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid user-facing configuration (file contents, flags, presets).
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure: non-SPD factorization, SVD breakdown, NaN iterates.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// File-format or I/O failure for on-disk containers.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Fixed-point iteration produced NaN or failed to stay finite.
/// Carries the residual history observed up to the failure.
struct divergence_error : numeric_error {
    divergence_error(const std::string& msg, std::vector<double> history)
        : numeric_error(msg), residual_history(std::move(history)) {}
    std::vector<double> residual_history;
};

} // namespace deqmpi
