#pragma once

#include "deqmpi/config.hpp"
#include "deqmpi/forward_model.hpp"
#include "deqmpi/nn.hpp"

namespace deqmpi {

/// Placement of each complex measurement row on the (frequency, angle)
/// plane. Rows dropped by SNR selection leave zero-filled cells.
struct LcLayout {
    std::size_t freq_bins = 0;
    std::size_t n_angles = 0;
    std::vector<std::uint32_t> cell; // per complex row: f * n_angles + angle
};

LcLayout lc_layout(const SystemMatrix& sm);

struct LcWorkspace {
    Tensor input;                    // (1, 4, F, Phi): Re/Im of v, Re/Im of y
    std::vector<Tensor> hidden;      // post-ReLU hidden activations
    Tensor head;                     // (1, 2, F, Phi) linear output
    Vector z;                        // gathered network output, stacked 2M
    Vector y;                        // acquired data, stacked 2M
    Vector diff;                     // z - y
    double dist = 0.0;               // ||z - y||
    double eps = 0.0;
    bool inside = true;
};

/// Seeded weights, names prefixed "lc.".
ParamStore lc_init_params(const LcConfig& cfg, std::uint64_t seed);
ParamStore lc_zero_params(const LcConfig& cfg);

/// Learned consistency: v and y are scattered onto the (f, phi) plane,
/// filtered with 1-D kernels along f, gathered back, and the result is
/// projected onto the eps-ball around y. Pass eps = +infinity to disable
/// the ball constraint.
Vector lc_forward(const Vector& v, const Vector& y, double eps, const ParamStore& params,
                  const LcConfig& cfg, const LcLayout& layout, LcWorkspace* ws = nullptr);

/// Adjoint at the recorded workspace. Returns the gradient w.r.t. v;
/// optionally also the gradient w.r.t. y and parameter gradients.
Vector lc_vjp(const LcWorkspace& ws, const Vector& upstream, const ParamStore& params,
              const LcConfig& cfg, const LcLayout& layout, ParamStore* grads,
              Vector* dy = nullptr);

} // namespace deqmpi
