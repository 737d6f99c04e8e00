#include "deqmpi/lc.hpp"

#include <cmath>

#include "deqmpi/rng.hpp"

namespace deqmpi {

LcLayout lc_layout(const SystemMatrix& sm) {
    LcLayout l;
    l.freq_bins = sm.freq_bins;
    l.n_angles = sm.n_angles;
    l.cell.resize(sm.complex_rows);
    for (std::size_t i = 0; i < sm.complex_rows; ++i)
        l.cell[i] = sm.freq_index[i] * static_cast<std::uint32_t>(sm.n_angles) +
                    sm.row_labels[i].angle;
    return l;
}

namespace {

ParamStore build_params(const LcConfig& cfg, std::uint64_t seed, bool zero) {
    cfg.validate();
    Rng seeds(Rng::mix(seed, 0x1c1c));
    ParamStore ps;
    std::size_t ci = 4;
    for (std::size_t l = 0; l < cfg.n_lc; ++l) {
        const std::string name = "lc.h" + std::to_string(l);
        Tensor w = zero ? Tensor(cfg.f_lc, ci, cfg.kernel, 1)
                        : he_uniform(cfg.f_lc, ci, cfg.kernel, 1, seeds.next_u64());
        ps.add(name + ".w", std::move(w));
        ps.add(name + ".b", Tensor(1, cfg.f_lc, 1, 1));
        ci = cfg.f_lc;
    }
    Tensor w = zero ? Tensor(2, ci, cfg.kernel, 1)
                    : he_uniform(2, ci, cfg.kernel, 1, seeds.next_u64());
    ps.add("lc.out.w", std::move(w));
    ps.add("lc.out.b", Tensor(1, 2, 1, 1));
    return ps;
}

} // namespace

ParamStore lc_init_params(const LcConfig& cfg, std::uint64_t seed) {
    return build_params(cfg, seed, false);
}

ParamStore lc_zero_params(const LcConfig& cfg) { return build_params(cfg, 0, true); }

Vector lc_forward(const Vector& v, const Vector& y, double eps, const ParamStore& p,
                  const LcConfig& cfg, const LcLayout& layout, LcWorkspace* ws) {
    if (eps < 0.0) throw config_error("lc_forward: eps must be >= 0");
    if (v.size() != y.size() || v.size() != 2 * layout.cell.size())
        throw shape_error("lc_forward: stacked length does not match the layout");
    const std::size_t M = layout.cell.size();

    LcWorkspace local;
    LcWorkspace& s = ws ? *ws : local;
    s.eps = eps;
    s.y = y;

    s.input = Tensor(1, 4, layout.freq_bins, layout.n_angles);
    for (std::size_t i = 0; i < M; ++i) {
        const std::size_t cell = layout.cell[i];
        s.input.chan(0, 0)[cell] = v[i];
        s.input.chan(0, 1)[cell] = v[M + i];
        s.input.chan(0, 2)[cell] = y[i];
        s.input.chan(0, 3)[cell] = y[M + i];
    }

    s.hidden.clear();
    const Tensor* cur = &s.input;
    for (std::size_t l = 0; l < cfg.n_lc; ++l) {
        const std::string name = "lc.h" + std::to_string(l);
        s.hidden.push_back(relu_fwd(conv1d_fwd(*cur, p.weight(name + ".w"), p.weight(name + ".b"))));
        cur = &s.hidden.back();
    }
    s.head = conv1d_fwd(*cur, p.weight("lc.out.w"), p.weight("lc.out.b"));

    s.z.resize(2 * M);
    for (std::size_t i = 0; i < M; ++i) {
        const std::size_t cell = layout.cell[i];
        s.z[i] = s.head.chan(0, 0)[cell];
        s.z[M + i] = s.head.chan(0, 1)[cell];
    }

    s.diff.resize(2 * M);
    for (std::size_t i = 0; i < 2 * M; ++i) s.diff[i] = s.z[i] - y[i];
    s.dist = norm2(s.diff);
    s.inside = s.dist <= eps;

    Vector out(2 * M);
    if (s.inside) {
        out = s.z;
    } else {
        const double scale = eps / s.dist;
        for (std::size_t i = 0; i < 2 * M; ++i) out[i] = y[i] + scale * s.diff[i];
    }
    return out;
}

Vector lc_vjp(const LcWorkspace& s, const Vector& upstream, const ParamStore& p,
              const LcConfig& cfg, const LcLayout& layout, ParamStore* grads, Vector* dy) {
    const std::size_t M = layout.cell.size();
    if (upstream.size() != 2 * M) throw shape_error("lc_vjp: upstream length mismatch");

    // Ball projection: out = y + q(z - y). Inside the ball q is the identity;
    // outside q(r) = eps * r / ||r|| with Jacobian (eps/||r||)(I - rr^T/||r||^2).
    Vector g_r(2 * M);
    if (s.inside) {
        g_r = upstream;
    } else {
        const double inv = 1.0 / s.dist;
        const double rs = dot(s.diff, upstream) * inv * inv;
        for (std::size_t i = 0; i < 2 * M; ++i)
            g_r[i] = s.eps * inv * (upstream[i] - rs * s.diff[i]);
    }

    // Scatter the z-gradient back onto the plane and run the conv adjoints.
    Tensor g_head(1, 2, layout.freq_bins, layout.n_angles);
    for (std::size_t i = 0; i < M; ++i) {
        const std::size_t cell = layout.cell[i];
        g_head.chan(0, 0)[cell] = g_r[i];
        g_head.chan(0, 1)[cell] = g_r[M + i];
    }

    auto dwp = [&](const std::string& n) -> Tensor* { return grads ? &grads->grad(n) : nullptr; };

    const Tensor* head_in = cfg.n_lc > 0 ? &s.hidden.back() : &s.input;
    Tensor g_cur;
    conv1d_vjp(*head_in, p.weight("lc.out.w"), g_head, &g_cur, dwp("lc.out.w"), dwp("lc.out.b"));
    for (std::size_t li = 0; li < cfg.n_lc; ++li) {
        const std::size_t l = cfg.n_lc - 1 - li;
        const Tensor g_pre = relu_vjp(s.hidden[l], g_cur);
        const Tensor* in = l == 0 ? &s.input : &s.hidden[l - 1];
        const std::string name = "lc.h" + std::to_string(l);
        Tensor g_next;
        conv1d_vjp(*in, p.weight(name + ".w"), g_pre, &g_next, dwp(name + ".w"), dwp(name + ".b"));
        g_cur = std::move(g_next);
    }

    Vector g_v(2 * M);
    for (std::size_t i = 0; i < M; ++i) {
        const std::size_t cell = layout.cell[i];
        g_v[i] = g_cur.chan(0, 0)[cell];
        g_v[M + i] = g_cur.chan(0, 1)[cell];
    }
    if (dy) {
        dy->assign(2 * M, 0.0);
        for (std::size_t i = 0; i < 2 * M; ++i) (*dy)[i] = upstream[i] - g_r[i];
        for (std::size_t i = 0; i < M; ++i) {
            const std::size_t cell = layout.cell[i];
            (*dy)[i] += g_cur.chan(0, 2)[cell];
            (*dy)[M + i] += g_cur.chan(0, 3)[cell];
        }
    }
    return g_v;
}

} // namespace deqmpi
