#pragma once

#include "deqmpi/config.hpp"
#include "deqmpi/nn.hpp"

namespace deqmpi {

/// Activations recorded by rdn_forward for the backward pass. Each residual
/// module keeps one wide buffer holding [module input ; dense outputs].
struct RdnWorkspace {
    Tensor input;     // (n, 1, H, W)
    Tensor z0_act;    // after first conv + ReLU
    Tensor u0;        // after second conv (module 0 input)
    std::vector<Tensor> cat;  // per module: (n, f_r + n_conv * f_s, H, W)
    std::vector<Tensor> out;  // per module: u_m after residual add
    Tensor fuse_cat;  // (n, n_res * f_r, H, W)
    Tensor fuse_out;  // (n, f_r, H, W)
    Tensor activated; // final output (mask source for the closing ReLU)
};

/// Seeded He-uniform weights for the full block, names prefixed "rdn.".
ParamStore rdn_init_params(const RdnConfig& cfg, std::uint64_t seed);

/// Zero-weight parameters; the block then reduces to ReLU(v).
ParamStore rdn_zero_params(const RdnConfig& cfg);

/// Residual dense regularizer: shallow feature extractor, n_res densely
/// concatenated residual modules, 1x1 fusion, output conv, residual add of
/// the input and a closing ReLU. Input and output are (n, 1, H, W).
Tensor rdn_forward(const Tensor& v, const ParamStore& params, const RdnConfig& cfg,
                   RdnWorkspace* ws = nullptr);

/// Adjoint of rdn_forward at the recorded activations; accumulates parameter
/// gradients into `grads` when non-null and returns the input gradient.
Tensor rdn_vjp(const RdnWorkspace& ws, const Tensor& upstream, const ParamStore& params,
               const RdnConfig& cfg, ParamStore* grads);

} // namespace deqmpi
