#include "deqmpi/rdn.hpp"

#include <cstring>

#include "deqmpi/rng.hpp"

namespace deqmpi {

namespace {

std::string mod_layer(std::size_t m, std::size_t l) {
    return "rdn.m" + std::to_string(m) + ".l" + std::to_string(l);
}

std::string mod_out(std::size_t m) { return "rdn.m" + std::to_string(m) + ".out"; }

void add_conv(ParamStore& ps, const std::string& name, std::size_t co, std::size_t ci,
              std::size_t kh, std::size_t kw, Rng& seeds, bool zero) {
    Tensor w = zero ? Tensor(co, ci, kh, kw) : he_uniform(co, ci, kh, kw, seeds.next_u64());
    ps.add(name + ".w", std::move(w));
    ps.add(name + ".b", Tensor(1, co, 1, 1));
}

ParamStore build_params(const RdnConfig& cfg, std::uint64_t seed, bool zero) {
    cfg.validate();
    Rng seeds(Rng::mix(seed, 0x2d11));
    const std::size_t k = cfg.kernel;
    ParamStore ps;
    add_conv(ps, "rdn.z0a", cfg.f_r, 1, k, k, seeds, zero);
    add_conv(ps, "rdn.z0b", cfg.f_r, cfg.f_r, k, k, seeds, zero);
    for (std::size_t m = 0; m < cfg.n_res; ++m) {
        for (std::size_t l = 0; l < cfg.n_conv; ++l)
            add_conv(ps, mod_layer(m, l), cfg.f_s, cfg.f_r + l * cfg.f_s, k, k, seeds, zero);
        add_conv(ps, mod_out(m), cfg.f_r, cfg.f_r + cfg.n_conv * cfg.f_s, k, k, seeds, zero);
    }
    add_conv(ps, "rdn.fuse", cfg.f_r, cfg.n_res * cfg.f_r, 1, 1, seeds, zero);
    add_conv(ps, "rdn.out", 1, cfg.f_r, k, k, seeds, zero);
    return ps;
}

void copy_channels(Tensor& dst, std::size_t dst_c0, const Tensor& src) {
    for (std::size_t ni = 0; ni < src.n; ++ni)
        for (std::size_t ci = 0; ci < src.c; ++ci)
            std::memcpy(dst.chan(ni, dst_c0 + ci), src.chan(ni, ci),
                        sizeof(double) * src.plane());
}

void add_channels(Tensor& dst, const Tensor& src, std::size_t src_c0) {
    for (std::size_t ni = 0; ni < dst.n; ++ni)
        for (std::size_t ci = 0; ci < dst.c; ++ci) {
            const double* s = src.chan(ni, src_c0 + ci);
            double* d = dst.chan(ni, ci);
            for (std::size_t i = 0; i < dst.plane(); ++i) d[i] += s[i];
        }
}

} // namespace

ParamStore rdn_init_params(const RdnConfig& cfg, std::uint64_t seed) {
    return build_params(cfg, seed, false);
}

ParamStore rdn_zero_params(const RdnConfig& cfg) { return build_params(cfg, 0, true); }

Tensor rdn_forward(const Tensor& v, const ParamStore& p, const RdnConfig& cfg, RdnWorkspace* ws) {
    if (v.c != 1) throw shape_error("rdn_forward: expected a single-channel input");
    RdnWorkspace local;
    RdnWorkspace& s = ws ? *ws : local;
    s.cat.assign(cfg.n_res, Tensor());
    s.out.assign(cfg.n_res, Tensor());
    s.input = v;

    s.z0_act = relu_fwd(conv2d_fwd(v, p.weight("rdn.z0a.w"), p.weight("rdn.z0a.b")));
    s.u0 = conv2d_fwd(s.z0_act, p.weight("rdn.z0b.w"), p.weight("rdn.z0b.b"));

    const Tensor* u_prev = &s.u0;
    for (std::size_t m = 0; m < cfg.n_res; ++m) {
        Tensor& cat = s.cat[m];
        cat = Tensor(v.n, cfg.f_r + cfg.n_conv * cfg.f_s, v.h, v.w);
        copy_channels(cat, 0, *u_prev);
        for (std::size_t l = 0; l < cfg.n_conv; ++l) {
            // The prefix conv reads [u_prev ; dense outputs so far].
            const std::string name = mod_layer(m, l);
            Tensor act = relu_fwd(
                conv2d_prefix_fwd(cat, p.weight(name + ".w"), p.weight(name + ".b")));
            copy_channels(cat, cfg.f_r + l * cfg.f_s, act);
        }
        Tensor u = conv2d_fwd(cat, p.weight(mod_out(m) + ".w"), p.weight(mod_out(m) + ".b"));
        s.out[m] = add_fwd(u, *u_prev);
        u_prev = &s.out[m];
    }

    s.fuse_cat = Tensor(v.n, cfg.n_res * cfg.f_r, v.h, v.w);
    for (std::size_t m = 0; m < cfg.n_res; ++m) copy_channels(s.fuse_cat, m * cfg.f_r, s.out[m]);
    s.fuse_out = conv2d_fwd(s.fuse_cat, p.weight("rdn.fuse.w"), p.weight("rdn.fuse.b"));

    Tensor pre = conv2d_fwd(s.fuse_out, p.weight("rdn.out.w"), p.weight("rdn.out.b"));
    s.activated = relu_fwd(add_fwd(pre, v));
    return s.activated;
}

Tensor rdn_vjp(const RdnWorkspace& s, const Tensor& upstream, const ParamStore& p,
               const RdnConfig& cfg, ParamStore* grads) {
    auto dw = [&](const std::string& n) -> Tensor* { return grads ? &grads->grad(n) : nullptr; };

    const Tensor g_pre = relu_vjp(s.activated, upstream);
    Tensor g_v = g_pre; // residual path of the closing add

    Tensor g_fuse_out;
    conv2d_vjp(s.fuse_out, p.weight("rdn.out.w"), g_pre, &g_fuse_out, dw("rdn.out.w"),
               dw("rdn.out.b"));
    Tensor g_fuse_cat;
    conv2d_vjp(s.fuse_cat, p.weight("rdn.fuse.w"), g_fuse_out, &g_fuse_cat, dw("rdn.fuse.w"),
               dw("rdn.fuse.b"));

    // Walk the residual modules backwards, carrying the gradient w.r.t. the
    // module input; each module also receives its fusion slice.
    Tensor g_u(upstream.n, cfg.f_r, upstream.h, upstream.w);
    for (std::size_t mi = 0; mi < cfg.n_res; ++mi) {
        const std::size_t m = cfg.n_res - 1 - mi;
        add_channels(g_u, g_fuse_cat, m * cfg.f_r);

        Tensor g_cat;
        conv2d_vjp(s.cat[m], p.weight(mod_out(m) + ".w"), g_u, &g_cat, dw(mod_out(m) + ".w"),
                   dw(mod_out(m) + ".b"));
        for (std::size_t li = 0; li < cfg.n_conv; ++li) {
            const std::size_t l = cfg.n_conv - 1 - li;
            // Slice of g_cat holding this layer's output gradient.
            Tensor g_act(upstream.n, cfg.f_s, upstream.h, upstream.w);
            std::fill(g_act.data.begin(), g_act.data.end(), 0.0);
            add_channels(g_act, g_cat, cfg.f_r + l * cfg.f_s);
            Tensor act(upstream.n, cfg.f_s, upstream.h, upstream.w);
            std::fill(act.data.begin(), act.data.end(), 0.0);
            add_channels(act, s.cat[m], cfg.f_r + l * cfg.f_s);
            const Tensor g_conv = relu_vjp(act, g_act);
            const std::string name = mod_layer(m, l);
            conv2d_prefix_vjp(s.cat[m], p.weight(name + ".w"), g_conv, &g_cat,
                              dw(name + ".w"), dw(name + ".b"));
        }
        // Residual add plus the prefix slice feeding the dense stack.
        Tensor g_next(upstream.n, cfg.f_r, upstream.h, upstream.w);
        add_channels(g_next, g_cat, 0);
        for (std::size_t i = 0; i < g_u.data.size(); ++i) g_next.data[i] += g_u.data[i];
        g_u = std::move(g_next);
    }

    Tensor g_z0_act;
    conv2d_vjp(s.z0_act, p.weight("rdn.z0b.w"), g_u, &g_z0_act, dw("rdn.z0b.w"), dw("rdn.z0b.b"));
    const Tensor g_z0_pre = relu_vjp(s.z0_act, g_z0_act);
    Tensor g_in;
    conv2d_vjp(s.input, p.weight("rdn.z0a.w"), g_z0_pre, &g_in, dw("rdn.z0a.w"), dw("rdn.z0a.b"));
    for (std::size_t i = 0; i < g_v.data.size(); ++i) g_v.data[i] += g_in.data[i];
    return g_v;
}

} // namespace deqmpi
