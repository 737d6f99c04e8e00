#pragma once

#include "deqmpi/image.hpp"
#include "deqmpi/linalg.hpp"

namespace deqmpi {

/// Projection onto the closed eps-ball around y.
Vector proj_l2_ball(const Vector& v, const Vector& y, double eps);

/// Elementwise soft threshold; optionally clamps negatives afterwards.
Vector prox_l1(const Vector& v, double tau, bool nonneg);

/// Isotropic 2-D TV proximal via projected gradient on the dual
/// (step 0.249, fixed iteration count).
ImageGrid prox_tv(const ImageGrid& v, double tau, std::size_t inner_iters);

/// tau * TV(x) + 0.5 * ||x - v||^2, the objective prox_tv minimizes.
double tv_prox_objective(const ImageGrid& x, const ImageGrid& v, double tau);

/// Isotropic total variation of an image.
double total_variation(const ImageGrid& x);

} // namespace deqmpi
