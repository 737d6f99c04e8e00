#pragma once

#include <functional>
#include <memory>

#include "deqmpi/config.hpp"
#include "deqmpi/forward_model.hpp"
#include "deqmpi/lc.hpp"
#include "deqmpi/rdn.hpp"
#include "deqmpi/solvers.hpp"

namespace deqmpi {

/// Fixed-point state iterated by the equilibrium mapping; flattened order is
/// (x, d0, d1).
struct DeqState {
    Vector x;  // N
    Vector d0; // 2M
    Vector d1; // N
};

Vector flatten(const DeqState& s);
DeqState unflatten(const Vector& v, std::size_t n, std::size_t m2);

struct FixedPointResult {
    Vector value;
    std::size_t iters = 0; // number of map evaluations
    bool converged = false;
    std::vector<double> residuals; // relative change per iteration
};

using VecMap = std::function<Vector(const Vector&)>;

/// Anderson(m) mixing over flattened iterates with ridge-regularized least
/// squares; stops when the relative l2 change between consecutive iterates
/// drops below cfg.tol.
FixedPointResult anderson_solve(const VecMap& f, const Vector& init, const AndersonConfig& cfg);

/// Plain Picard iteration with the same stopping rule.
FixedPointResult picard_solve(const VecMap& f, const Vector& init, const AndersonConfig& cfg);

/// Reconstruction-side operator bundle: cached Gram matrix, truncated
/// pseudo-inverse and measurement-plane layout.
struct SmOperator {
    SystemMatrix sm;
    DenseMatrix gram; // A^T A
    std::shared_ptr<TruncatedPinv> pinv;
    LcLayout layout;

    static SmOperator build(SystemMatrix sm, double pinv_tol = 1e-3);
};

/// Everything the equilibrium mapping needs, already whitened.
struct HContext {
    const SystemMatrix* sm = nullptr;
    const Vector* y = nullptr;
    double eps = 0.0;
    const ParamStore* params = nullptr;
    const CholeskyFactor* chol = nullptr;
    const LcLayout* layout = nullptr;
    RdnConfig rdn_cfg;
    LcConfig lc_cfg;
    bool learned_lc = true;
};

struct HWorkspace {
    DeqState in;
    Vector v0;
    Vector z0, z1;
    Vector xplus, ax_plus;
    LcWorkspace lc;
    RdnWorkspace rdn;
    // unlearned projection internals
    Vector proj_diff;
    double proj_dist = 0.0;
    bool proj_inside = true;
};

/// One application of the equilibrium mapping: learned (or unlearned) data
/// consistency, learned regularization, least-squares reconciliation and
/// multiplier updates.
DeqState h_theta(const DeqState& st, const HContext& ctx, HWorkspace* ws = nullptr);

/// Adjoint of h_theta at the recorded workspace: returns (dh/dstate)^T * up
/// and, when grads is non-null, accumulates (dh/dtheta)^T * up.
DeqState h_theta_vjp(const HWorkspace& ws, const HContext& ctx, const DeqState& upstream,
                     ParamStore* grads);

struct DeqInferOptions {
    AndersonConfig anderson;
    RdnConfig rdn;
    LcConfig lc;
    bool learned_lc = true;
    double eps = -1.0; // < 0 -> sqrt(stacked M) when noise_std is known, else 0
};

/// Forward solve retaining everything needed for implicit differentiation.
struct DeqSolveResult {
    DeqState state;
    std::size_t iters = 0;
    bool converged = false;
    std::vector<double> residuals;
    SystemMatrix sm_w; // whitened operator
    Vector y_w;
    double eps = 0.0;
    CholeskyFactor chol;
};

DeqSolveResult deq_solve(const SmOperator& op, const Measurement& meas, const ParamStore& params,
                         const DeqInferOptions& opts);

/// Equilibrium inference: least-squares initialization, Anderson-accelerated
/// fixed point, nonnegative clamp of the image component.
ImageGrid deq_infer(const SmOperator& op, const Measurement& meas, const ParamStore& params,
                    const DeqInferOptions& opts);

/// Implicit differentiation at the converged state: solves the transposed
/// fixed-point system s = (dh/dstate)^T s + b by (Anderson-accelerated)
/// iteration and accumulates (dh/dtheta)^T s into grads.
void implicit_backward(const DeqSolveResult& solved, const SmOperator& op,
                       const ParamStore& params, const DeqInferOptions& opts,
                       const Vector& loss_grad_x, ParamStore* grads);

} // namespace deqmpi
