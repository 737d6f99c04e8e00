#include "deqmpi/nn.hpp"

#include <cmath>
#include <cstring>

#include "deqmpi/rng.hpp"

namespace deqmpi {

namespace {

void check_conv_shapes(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (w.c != x.c)
        throw shape_error("conv: input has " + std::to_string(x.c) + " channels, kernel expects " +
                          std::to_string(w.c));
    if (b.size() != w.n) throw shape_error("conv: bias size != output channels");
    if (w.h % 2 == 0 || w.w % 2 == 0) throw shape_error("conv: kernel dims must be odd");
}

// Zero-padded copy of one input channel; removes bounds checks from the
// accumulation loops.
void pad_channel(const double* src, std::size_t H, std::size_t W, std::size_t ph, std::size_t pw,
                 double* dst) {
    const std::size_t PW = W + 2 * pw;
    std::memset(dst, 0, sizeof(double) * (H + 2 * ph) * PW);
    for (std::size_t r = 0; r < H; ++r)
        std::memcpy(dst + (r + ph) * PW + pw, src + r * W, sizeof(double) * W);
}

} // namespace

namespace {

Tensor conv_fwd_core(const Tensor& x, std::size_t c_used, const Tensor& w, const Tensor& b) {
    const std::size_t H = x.h, W = x.w;
    const std::size_t ph = (w.h - 1) / 2, pw = (w.w - 1) / 2;
    const std::size_t PW = W + 2 * pw;

    Tensor out(x.n, w.n, H, W);
    std::vector<double> pad((H + 2 * ph) * PW);
    for (std::size_t ni = 0; ni < x.n; ++ni) {
        // Initialize all output channels with their bias.
        for (std::size_t co = 0; co < w.n; ++co) {
            double* o = out.chan(ni, co);
            const double bias = b.data[co];
            for (std::size_t i = 0; i < H * W; ++i) o[i] = bias;
        }
        for (std::size_t ci = 0; ci < c_used; ++ci) {
            pad_channel(x.chan(ni, ci), H, W, ph, pw, pad.data());
            for (std::size_t co = 0; co < w.n; ++co) {
                double* o = out.chan(ni, co);
                const double* wk = w.chan(co, ci);
                for (std::size_t kh = 0; kh < w.h; ++kh)
                    for (std::size_t kw = 0; kw < w.w; ++kw) {
                        const double wv = wk[kh * w.w + kw];
                        if (wv == 0.0) continue;
                        for (std::size_t r = 0; r < H; ++r) {
                            const double* src = pad.data() + (r + kh) * PW + kw;
                            double* dst = o + r * W;
                            for (std::size_t c = 0; c < W; ++c) dst[c] += wv * src[c];
                        }
                    }
            }
        }
    }
    return out;
}

void conv_vjp_core(const Tensor& x, std::size_t c_used, const Tensor& w, const Tensor& upstream,
                   Tensor* dx, Tensor* dw, Tensor* db) {
    if (upstream.n != x.n || upstream.c != w.n || upstream.h != x.h || upstream.w != x.w)
        throw shape_error("conv2d_vjp: upstream shape mismatch");
    const std::size_t H = x.h, W = x.w;
    const std::size_t ph = (w.h - 1) / 2, pw = (w.w - 1) / 2;
    const std::size_t PW = W + 2 * pw;

    if (db) {
        if (db->size() != w.n) *db = Tensor(1, w.n, 1, 1);
        for (std::size_t ni = 0; ni < x.n; ++ni)
            for (std::size_t co = 0; co < w.n; ++co) {
                const double* u = upstream.chan(ni, co);
                double s = 0.0;
                for (std::size_t i = 0; i < H * W; ++i) s += u[i];
                db->data[co] += s;
            }
    }

    std::vector<double> pad((H + 2 * ph) * PW);
    if (dw) {
        if (!dw->same_shape(w)) *dw = Tensor(w.n, w.c, w.h, w.w);
        for (std::size_t ni = 0; ni < x.n; ++ni)
            for (std::size_t ci = 0; ci < c_used; ++ci) {
                pad_channel(x.chan(ni, ci), H, W, ph, pw, pad.data());
                for (std::size_t co = 0; co < w.n; ++co) {
                    const double* u = upstream.chan(ni, co);
                    double* g = dw->chan(co, ci);
                    for (std::size_t kh = 0; kh < w.h; ++kh)
                        for (std::size_t kw = 0; kw < w.w; ++kw) {
                            double s = 0.0;
                            for (std::size_t r = 0; r < H; ++r) {
                                const double* src = pad.data() + (r + kh) * PW + kw;
                                const double* uu = u + r * W;
                                for (std::size_t c = 0; c < W; ++c) s += uu[c] * src[c];
                            }
                            g[kh * w.w + kw] += s;
                        }
                }
            }
    }

    if (dx) {
        if (!dx->same_shape(x)) *dx = Tensor(x.n, x.c, x.h, x.w);
        // Scatter upstream through the kernel into a padded buffer, then crop.
        std::vector<double> acc((H + 2 * ph) * PW);
        for (std::size_t ni = 0; ni < x.n; ++ni)
            for (std::size_t ci = 0; ci < c_used; ++ci) {
                std::memset(acc.data(), 0, sizeof(double) * acc.size());
                for (std::size_t co = 0; co < w.n; ++co) {
                    const double* u = upstream.chan(ni, co);
                    const double* wk = w.chan(co, ci);
                    for (std::size_t kh = 0; kh < w.h; ++kh)
                        for (std::size_t kw = 0; kw < w.w; ++kw) {
                            const double wv = wk[kh * w.w + kw];
                            if (wv == 0.0) continue;
                            for (std::size_t r = 0; r < H; ++r) {
                                double* dst = acc.data() + (r + kh) * PW + kw;
                                const double* uu = u + r * W;
                                for (std::size_t c = 0; c < W; ++c) dst[c] += wv * uu[c];
                            }
                        }
                }
                double* g = dx->chan(ni, ci);
                for (std::size_t r = 0; r < H; ++r)
                    for (std::size_t c = 0; c < W; ++c) g[r * W + c] += acc[(r + ph) * PW + c + pw];
            }
    }
}

} // namespace

Tensor conv2d_fwd(const Tensor& x, const Tensor& w, const Tensor& b) {
    check_conv_shapes(x, w, b);
    return conv_fwd_core(x, x.c, w, b);
}

void conv2d_vjp(const Tensor& x, const Tensor& w, const Tensor& upstream, Tensor* dx, Tensor* dw,
                Tensor* db) {
    if (w.c != x.c) throw shape_error("conv2d_vjp: channel mismatch");
    conv_vjp_core(x, x.c, w, upstream, dx, dw, db);
}

Tensor conv2d_prefix_fwd(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (w.c > x.c) throw shape_error("conv2d_prefix: kernel wants more channels than available");
    if (b.size() != w.n) throw shape_error("conv: bias size != output channels");
    if (w.h % 2 == 0 || w.w % 2 == 0) throw shape_error("conv: kernel dims must be odd");
    return conv_fwd_core(x, w.c, w, b);
}

void conv2d_prefix_vjp(const Tensor& x, const Tensor& w, const Tensor& upstream, Tensor* dx,
                       Tensor* dw, Tensor* db) {
    if (w.c > x.c) throw shape_error("conv2d_prefix: kernel wants more channels than available");
    conv_vjp_core(x, w.c, w, upstream, dx, dw, db);
}

Tensor conv1d_fwd(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (w.w != 1) throw shape_error("conv1d: kernel must be k x 1");
    return conv2d_fwd(x, w, b);
}

void conv1d_vjp(const Tensor& x, const Tensor& w, const Tensor& upstream, Tensor* dx, Tensor* dw,
                Tensor* db) {
    if (w.w != 1) throw shape_error("conv1d: kernel must be k x 1");
    conv2d_vjp(x, w, upstream, dx, dw, db);
}

Tensor relu_fwd(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.data)
        if (v < 0.0) v = 0.0;
    return out;
}

Tensor relu_vjp(const Tensor& activated, const Tensor& upstream) {
    if (!activated.same_shape(upstream)) throw shape_error("relu_vjp: shape mismatch");
    Tensor out = upstream;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        if (activated.data[i] <= 0.0) out.data[i] = 0.0;
    return out;
}

Tensor concat_fwd(const std::vector<const Tensor*>& parts) {
    if (parts.empty()) throw shape_error("concat: no inputs");
    std::size_t channels = 0;
    for (const Tensor* p : parts) {
        if (p->n != parts[0]->n || p->h != parts[0]->h || p->w != parts[0]->w)
            throw shape_error("concat: spatial or batch mismatch");
        channels += p->c;
    }
    Tensor out(parts[0]->n, channels, parts[0]->h, parts[0]->w);
    for (std::size_t ni = 0; ni < out.n; ++ni) {
        std::size_t co = 0;
        for (const Tensor* p : parts)
            for (std::size_t ci = 0; ci < p->c; ++ci, ++co)
                std::memcpy(out.chan(ni, co), p->chan(ni, ci), sizeof(double) * out.plane());
    }
    return out;
}

std::vector<Tensor> concat_vjp(const std::vector<const Tensor*>& parts, const Tensor& upstream) {
    std::vector<Tensor> grads;
    grads.reserve(parts.size());
    for (const Tensor* p : parts) grads.emplace_back(p->n, p->c, p->h, p->w);
    for (std::size_t ni = 0; ni < upstream.n; ++ni) {
        std::size_t co = 0;
        for (std::size_t k = 0; k < parts.size(); ++k)
            for (std::size_t ci = 0; ci < parts[k]->c; ++ci, ++co)
                std::memcpy(grads[k].chan(ni, ci), upstream.chan(ni, co),
                            sizeof(double) * upstream.plane());
    }
    return grads;
}

Tensor add_fwd(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw shape_error("add: shape mismatch");
    Tensor out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

Tensor he_uniform(std::size_t c_out, std::size_t c_in, std::size_t kh, std::size_t kw,
                  std::uint64_t seed) {
    Tensor t(c_out, c_in, kh, kw);
    const double fan_in = static_cast<double>(c_in * kh * kw);
    const double limit = std::sqrt(6.0 / fan_in);
    Rng rng(seed);
    for (double& v : t.data) v = rng.uniform(-limit, limit);
    return t;
}

} // namespace deqmpi
