#include "deqmpi/deq.hpp"

#include <cmath>

namespace deqmpi {

Vector flatten(const DeqState& s) {
    Vector v;
    v.reserve(s.x.size() + s.d0.size() + s.d1.size());
    v.insert(v.end(), s.x.begin(), s.x.end());
    v.insert(v.end(), s.d0.begin(), s.d0.end());
    v.insert(v.end(), s.d1.begin(), s.d1.end());
    return v;
}

DeqState unflatten(const Vector& v, std::size_t n, std::size_t m2) {
    if (v.size() != 2 * n + m2) throw shape_error("unflatten: length mismatch");
    DeqState s;
    s.x.assign(v.begin(), v.begin() + n);
    s.d0.assign(v.begin() + n, v.begin() + n + m2);
    s.d1.assign(v.begin() + n + m2, v.end());
    return s;
}

namespace {

bool finite(const Vector& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

double rel_change(const Vector& next, const Vector& prev) {
    double dn = 0.0, pn = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
        const double d = next[i] - prev[i];
        dn += d * d;
        pn += prev[i] * prev[i];
    }
    return std::sqrt(dn) / std::max(std::sqrt(pn), 1e-30);
}

} // namespace

FixedPointResult picard_solve(const VecMap& f, const Vector& init, const AndersonConfig& cfg) {
    FixedPointResult r;
    Vector u = init;
    for (std::size_t k = 0; k < cfg.max_iters; ++k) {
        Vector next = f(u);
        ++r.iters;
        if (!finite(next)) throw divergence_error("picard_solve: non-finite iterate", r.residuals);
        const double c = rel_change(next, u);
        r.residuals.push_back(c);
        u = std::move(next);
        if (c < cfg.tol) {
            r.converged = true;
            break;
        }
    }
    r.value = std::move(u);
    return r;
}

FixedPointResult anderson_solve(const VecMap& f, const Vector& init, const AndersonConfig& cfg) {
    cfg.validate();
    FixedPointResult r;
    const std::size_t dim = init.size();

    std::vector<Vector> xs, gs; // past iterates and their images
    Vector u = init;
    Vector g = f(u);
    ++r.iters;
    if (!finite(g)) throw divergence_error("anderson_solve: non-finite iterate", r.residuals);
    {
        const double c = rel_change(g, u);
        r.residuals.push_back(c);
        if (c < cfg.tol) {
            r.converged = true;
            r.value = std::move(g);
            return r;
        }
    }
    xs.push_back(u);
    gs.push_back(g);
    u = g;

    while (r.iters < cfg.max_iters) {
        g = f(u);
        ++r.iters;
        if (!finite(g)) throw divergence_error("anderson_solve: non-finite iterate", r.residuals);
        xs.push_back(u);
        gs.push_back(g);
        if (xs.size() > cfg.m) {
            xs.erase(xs.begin());
            gs.erase(gs.begin());
        }
        const std::size_t mk = xs.size();

        // Ridge-regularized normal equations for the mixing weights, with the
        // sum-to-one constraint folded in by normalization.
        DenseMatrix H(mk, mk);
        std::vector<Vector> res(mk, Vector(dim));
        for (std::size_t i = 0; i < mk; ++i)
            for (std::size_t d = 0; d < dim; ++d) res[i][d] = gs[i][d] - xs[i][d];
        for (std::size_t i = 0; i < mk; ++i)
            for (std::size_t j = i; j < mk; ++j) {
                const double v = dot(res[i], res[j]);
                H.at(i, j) = v;
                H.at(j, i) = v;
            }
        for (std::size_t i = 0; i < mk; ++i) H.at(i, i) += cfg.ridge;

        std::vector<double> alpha(mk, 0.0);
        bool ok = true;
        try {
            const CholeskyFactor hf = CholeskyFactor::factor(H);
            Vector w = hf.solve(Vector(mk, 1.0));
            double sum = 0.0;
            for (double v : w) sum += v;
            if (sum == 0.0 || !std::isfinite(sum)) {
                ok = false;
            } else {
                for (std::size_t i = 0; i < mk; ++i) alpha[i] = w[i] / sum;
            }
        } catch (const numeric_error&) {
            ok = false;
        }
        if (!ok) {
            alpha.assign(mk, 0.0);
            alpha[mk - 1] = 1.0; // fall back to the plain Picard step
        }

        Vector next(dim, 0.0);
        for (std::size_t i = 0; i < mk; ++i) {
            const double ag = cfg.beta * alpha[i];
            const double ax = (1.0 - cfg.beta) * alpha[i];
            const Vector& gi = gs[i];
            const Vector& xi = xs[i];
            for (std::size_t d = 0; d < dim; ++d) next[d] += ag * gi[d] + ax * xi[d];
        }

        const double c = rel_change(next, u);
        r.residuals.push_back(c);
        u = std::move(next);
        if (c < cfg.tol) {
            r.converged = true;
            break;
        }
    }
    r.value = std::move(u);
    return r;
}

SmOperator SmOperator::build(SystemMatrix sm, double pinv_tol) {
    SmOperator op;
    op.gram = gram(sm.stacked);
    op.pinv = std::make_shared<TruncatedPinv>(sm.stacked, pinv_tol);
    op.layout = lc_layout(sm);
    op.sm = std::move(sm);
    return op;
}

DeqState h_theta(const DeqState& st, const HContext& ctx, HWorkspace* ws) {
    const SystemMatrix& sm = *ctx.sm;
    HWorkspace local;
    HWorkspace& s = ws ? *ws : local;
    s.in = st;

    const Vector ax = matvec(sm.stacked, st.x);
    s.v0.resize(ax.size());
    for (std::size_t i = 0; i < ax.size(); ++i) s.v0[i] = ax[i] - st.d0[i];

    if (ctx.learned_lc) {
        s.z0 = lc_forward(s.v0, *ctx.y, ctx.eps, *ctx.params, ctx.lc_cfg, *ctx.layout, &s.lc);
    } else {
        s.proj_diff.resize(s.v0.size());
        for (std::size_t i = 0; i < s.v0.size(); ++i) s.proj_diff[i] = s.v0[i] - (*ctx.y)[i];
        s.proj_dist = norm2(s.proj_diff);
        s.proj_inside = s.proj_dist <= ctx.eps;
        if (s.proj_inside) {
            s.z0 = s.v0;
        } else {
            s.z0.resize(s.v0.size());
            const double sc = ctx.eps / s.proj_dist;
            for (std::size_t i = 0; i < s.v0.size(); ++i)
                s.z0[i] = (*ctx.y)[i] + sc * s.proj_diff[i];
        }
    }

    Vector v1(st.x.size());
    for (std::size_t i = 0; i < v1.size(); ++i) v1[i] = st.x[i] - st.d1[i];
    const Tensor z1t = rdn_forward(Tensor::from_image(ImageGrid(sm.grid_h, sm.grid_w, v1)),
                                   *ctx.params, ctx.rdn_cfg, &s.rdn);
    s.z1 = z1t.data;

    Vector rhs_data(s.z0.size());
    for (std::size_t i = 0; i < rhs_data.size(); ++i) rhs_data[i] = s.z0[i] + st.d0[i];
    Vector rhs = matvec_t(sm.stacked, rhs_data);
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += s.z1[i] + st.d1[i];
    s.xplus = ctx.chol->solve(rhs);
    s.ax_plus = matvec(sm.stacked, s.xplus);

    DeqState out;
    out.x = s.xplus;
    out.d0.resize(st.d0.size());
    for (std::size_t i = 0; i < st.d0.size(); ++i) out.d0[i] = st.d0[i] + s.z0[i] - s.ax_plus[i];
    out.d1.resize(st.d1.size());
    for (std::size_t i = 0; i < st.d1.size(); ++i) out.d1[i] = st.d1[i] + s.z1[i] - s.xplus[i];
    return out;
}

DeqState h_theta_vjp(const HWorkspace& ws, const HContext& ctx, const DeqState& up,
                     ParamStore* grads) {
    const SystemMatrix& sm = *ctx.sm;

    // x+ = M r feeds all three outputs; M is symmetric so its adjoint reuses
    // the same factor.
    Vector g_xplus = up.x;
    const Vector at_s0 = matvec_t(sm.stacked, up.d0);
    for (std::size_t i = 0; i < g_xplus.size(); ++i) g_xplus[i] -= at_s0[i] + up.d1[i];
    const Vector g_r = ctx.chol->solve(g_xplus);
    const Vector a_gr = matvec(sm.stacked, g_r);

    Vector g_z0(up.d0.size());
    for (std::size_t i = 0; i < g_z0.size(); ++i) g_z0[i] = a_gr[i] + up.d0[i];
    Vector g_z1(up.d1.size());
    for (std::size_t i = 0; i < g_z1.size(); ++i) g_z1[i] = g_r[i] + up.d1[i];

    Vector g_v0;
    if (ctx.learned_lc) {
        g_v0 = lc_vjp(ws.lc, g_z0, *ctx.params, ctx.lc_cfg, *ctx.layout, grads);
    } else {
        // Radial-projection Jacobian of the unlearned eps-ball projection.
        if (ws.proj_inside) {
            g_v0 = g_z0;
        } else {
            const double inv = 1.0 / ws.proj_dist;
            const double rs = dot(ws.proj_diff, g_z0) * inv * inv;
            g_v0.resize(g_z0.size());
            for (std::size_t i = 0; i < g_z0.size(); ++i)
                g_v0[i] = ctx.eps * inv * (g_z0[i] - rs * ws.proj_diff[i]);
        }
    }

    Tensor g_z1t(1, 1, sm.grid_h, sm.grid_w);
    g_z1t.data = g_z1;
    const Tensor g_v1t = rdn_vjp(ws.rdn, g_z1t, *ctx.params, ctx.rdn_cfg, grads);
    const Vector& g_v1 = g_v1t.data;

    DeqState out;
    out.x = matvec_t(sm.stacked, g_v0);
    for (std::size_t i = 0; i < out.x.size(); ++i) out.x[i] += g_v1[i];
    out.d0.resize(up.d0.size());
    for (std::size_t i = 0; i < out.d0.size(); ++i) out.d0[i] = -g_v0[i] + a_gr[i] + up.d0[i];
    out.d1.resize(up.d1.size());
    for (std::size_t i = 0; i < out.d1.size(); ++i) out.d1[i] = -g_v1[i] + g_r[i] + up.d1[i];
    return out;
}

namespace {

struct WhitenedProblem {
    SystemMatrix sm_w;
    Vector y_w;
    double eps = 0.0;
    CholeskyFactor chol;
};

WhitenedProblem whiten_problem(const SmOperator& op, const Measurement& meas,
                               const DeqInferOptions& opts) {
    WhitenedProblem p;
    const double scale = meas.noise_std ? 1.0 / *meas.noise_std : 1.0;
    p.sm_w = op.sm;
    if (scale != 1.0)
        for (double& v : p.sm_w.stacked.data) v *= scale;
    p.y_w = scaled(meas.data, scale);
    if (opts.eps >= 0.0)
        p.eps = opts.eps;
    else
        p.eps = meas.noise_std ? std::sqrt(static_cast<double>(p.y_w.size())) : 0.0;

    DenseMatrix normal = op.gram;
    const double s2 = scale * scale;
    for (double& v : normal.data) v *= s2;
    for (std::size_t i = 0; i < normal.rows; ++i) normal.at(i, i) += 1.0;
    p.chol = CholeskyFactor::factor(normal);
    return p;
}

} // namespace

DeqSolveResult deq_solve(const SmOperator& op, const Measurement& meas, const ParamStore& params,
                         const DeqInferOptions& opts) {
    if (meas.data.size() != op.sm.stacked_rows())
        throw shape_error("deq_solve: measurement length does not match system matrix");
    WhitenedProblem p = whiten_problem(op, meas, opts);

    HContext ctx;
    ctx.sm = &p.sm_w;
    ctx.y = &p.y_w;
    ctx.eps = p.eps;
    ctx.params = &params;
    ctx.chol = &p.chol;
    ctx.layout = &op.layout;
    ctx.rdn_cfg = opts.rdn;
    ctx.lc_cfg = opts.lc;
    ctx.learned_lc = opts.learned_lc;

    DeqState init;
    init.x = op.pinv->apply(meas.data);
    init.d0.assign(p.y_w.size(), 0.0);
    init.d1.assign(init.x.size(), 0.0);

    const std::size_t n = init.x.size(), m2 = init.d0.size();
    const VecMap f = [&](const Vector& v) {
        return flatten(h_theta(unflatten(v, n, m2), ctx, nullptr));
    };
    FixedPointResult fr = anderson_solve(f, flatten(init), opts.anderson);

    DeqSolveResult out;
    out.state = unflatten(fr.value, n, m2);
    out.iters = fr.iters;
    out.converged = fr.converged;
    out.residuals = std::move(fr.residuals);
    out.sm_w = std::move(p.sm_w);
    out.y_w = std::move(p.y_w);
    out.eps = p.eps;
    out.chol = std::move(p.chol);
    return out;
}

ImageGrid deq_infer(const SmOperator& op, const Measurement& meas, const ParamStore& params,
                    const DeqInferOptions& opts) {
    DeqSolveResult r = deq_solve(op, meas, params, opts);
    return clamp_nonneg(ImageGrid(op.sm.grid_h, op.sm.grid_w, r.state.x));
}

void implicit_backward(const DeqSolveResult& solved, const SmOperator& op,
                       const ParamStore& params, const DeqInferOptions& opts,
                       const Vector& loss_grad_x, ParamStore* grads) {
    HContext ctx;
    ctx.sm = &solved.sm_w;
    ctx.y = &solved.y_w;
    ctx.eps = solved.eps;
    ctx.params = &params;
    ctx.chol = &solved.chol;
    ctx.layout = &op.layout;
    ctx.rdn_cfg = opts.rdn;
    ctx.lc_cfg = opts.lc;
    ctx.learned_lc = opts.learned_lc;

    // One recording pass at the fixed point freezes the activation pattern
    // used by every Jacobian-transpose application.
    HWorkspace ws;
    (void)h_theta(solved.state, ctx, &ws);

    DeqState b;
    b.x = loss_grad_x;
    b.d0.assign(solved.y_w.size(), 0.0);
    b.d1.assign(loss_grad_x.size(), 0.0);
    const Vector b_flat = flatten(b);
    const std::size_t n = b.x.size(), m2 = b.d0.size();

    const VecMap fs = [&](const Vector& sv) {
        DeqState s = unflatten(sv, n, m2);
        DeqState js = h_theta_vjp(ws, ctx, s, nullptr);
        Vector out = flatten(js);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += b_flat[i];
        return out;
    };

    FixedPointResult fr;
    try {
        fr = anderson_solve(fs, b_flat, opts.anderson);
    } catch (const divergence_error& e) {
        throw divergence_error("implicit_backward: adjoint fixed point diverged",
                               e.residual_history);
    }
    (void)h_theta_vjp(ws, ctx, unflatten(fr.value, n, m2), grads);
}

} // namespace deqmpi
