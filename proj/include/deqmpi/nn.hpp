#pragma once

#include <cstdint>
#include <vector>

#include "deqmpi/tensor.hpp"

namespace deqmpi {

// Differentiable primitives: each forward has an exact adjoint (VJP).
// Convolutions are cross-correlations with SAME zero padding, stride 1;
// weights are (c_out, c_in, kh, kw), biases (1, c_out, 1, 1).

Tensor conv2d_fwd(const Tensor& x, const Tensor& w, const Tensor& b);
void conv2d_vjp(const Tensor& x, const Tensor& w, const Tensor& upstream, Tensor* dx, Tensor* dw,
                Tensor* db);

/// 1-D convolution along the h axis (frequency); kernels are kh x 1.
Tensor conv1d_fwd(const Tensor& x, const Tensor& w, const Tensor& b);
void conv1d_vjp(const Tensor& x, const Tensor& w, const Tensor& upstream, Tensor* dx, Tensor* dw,
                Tensor* db);

/// As conv2d_fwd but reads only the first w.c channels of x; used by the
/// densely concatenated blocks to avoid materializing channel slices.
Tensor conv2d_prefix_fwd(const Tensor& x, const Tensor& w, const Tensor& b);
void conv2d_prefix_vjp(const Tensor& x, const Tensor& w, const Tensor& upstream, Tensor* dx,
                       Tensor* dw, Tensor* db);

Tensor relu_fwd(const Tensor& x);
/// Subgradient at 0 is 0; the mask is recovered from the stored activation.
Tensor relu_vjp(const Tensor& activated, const Tensor& upstream);

Tensor concat_fwd(const std::vector<const Tensor*>& parts);
std::vector<Tensor> concat_vjp(const std::vector<const Tensor*>& parts, const Tensor& upstream);

Tensor add_fwd(const Tensor& a, const Tensor& b);

/// He-uniform fan-in initialization, seeded.
Tensor he_uniform(std::size_t c_out, std::size_t c_in, std::size_t kh, std::size_t kw,
                  std::uint64_t seed);

} // namespace deqmpi
