#pragma once

#include "deqmpi/config.hpp"
#include "deqmpi/forward_model.hpp"
#include "deqmpi/image.hpp"
#include "deqmpi/prox.hpp"

namespace deqmpi {

/// Splitting state for the constrained ADMM iterations: image x, auxiliary
/// variables z = [z0; z1] and multipliers d = [d0; d1] for the data and
/// image constraints.
struct AdmmState {
    Vector x;  // N
    Vector z0; // 2M
    Vector z1; // N
    Vector d0; // 2M
    Vector d1; // N
    std::size_t iter = 0;
};

AdmmState admm_init(const SystemMatrix& sm);

/// Cholesky factor of (I + A^T A) for the x-update.
CholeskyFactor admm_normal_factor(const SystemMatrix& sm);

/// One ADMM iteration: data projection, regularizer prox, least-squares
/// reconciliation, multiplier updates. eps is the data-consistency radius.
void admm_step(AdmmState& st, const SystemMatrix& sm, const Vector& y, double eps,
               const SolverConfig& cfg, const CholeskyFactor& chol);

/// Full reconstruction on whitened inputs. epsilon <= 0 selects the default
/// sqrt(stacked M). Returns the final x clamped nonnegative.
ImageGrid admm_reconstruct(const SystemMatrix& sm, const Measurement& y, const SolverConfig& cfg);

/// Row-cyclic regularized Kaczmarz with a nonnegativity clamp per sweep.
ImageGrid art_reconstruct(const SystemMatrix& sm, const Measurement& y, double lambda,
                          std::size_t n_iters);

} // namespace deqmpi
