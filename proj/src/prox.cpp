#include "deqmpi/prox.hpp"

#include <cmath>

namespace deqmpi {

Vector proj_l2_ball(const Vector& v, const Vector& y, double eps) {
    if (v.size() != y.size()) throw shape_error("proj_l2_ball: length mismatch");
    Vector diff(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) diff[i] = v[i] - y[i];
    const double d = norm2(diff);
    if (d <= eps) return v;
    Vector out(v.size());
    const double s = eps / d;
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = y[i] + s * diff[i];
    return out;
}

Vector prox_l1(const Vector& v, double tau, bool nonneg) {
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double a = std::abs(v[i]) - tau;
        double r = a > 0.0 ? (v[i] > 0.0 ? a : -a) : 0.0;
        if (nonneg && r < 0.0) r = 0.0;
        out[i] = r;
    }
    return out;
}

namespace {

// Forward differences with zero at the far edge; div is the negative adjoint.
void grad2d(const ImageGrid& x, ImageGrid& gr, ImageGrid& gc) {
    for (std::size_t r = 0; r < x.h; ++r)
        for (std::size_t c = 0; c < x.w; ++c) {
            gr.at(r, c) = (r + 1 < x.h) ? x.at(r + 1, c) - x.at(r, c) : 0.0;
            gc.at(r, c) = (c + 1 < x.w) ? x.at(r, c + 1) - x.at(r, c) : 0.0;
        }
}

ImageGrid div2d(const ImageGrid& pr, const ImageGrid& pc) {
    ImageGrid out(pr.h, pr.w);
    for (std::size_t r = 0; r < pr.h; ++r)
        for (std::size_t c = 0; c < pr.w; ++c) {
            double s = 0.0;
            if (r + 1 < pr.h) s += pr.at(r, c);
            if (r > 0) s -= pr.at(r - 1, c);
            if (c + 1 < pr.w) s += pc.at(r, c);
            if (c > 0) s -= pc.at(r, c - 1);
            out.at(r, c) = s;
        }
    return out;
}

} // namespace

double total_variation(const ImageGrid& x) {
    double tv = 0.0;
    for (std::size_t r = 0; r < x.h; ++r)
        for (std::size_t c = 0; c < x.w; ++c) {
            const double dr = (r + 1 < x.h) ? x.at(r + 1, c) - x.at(r, c) : 0.0;
            const double dc = (c + 1 < x.w) ? x.at(r, c + 1) - x.at(r, c) : 0.0;
            tv += std::sqrt(dr * dr + dc * dc);
        }
    return tv;
}

double tv_prox_objective(const ImageGrid& x, const ImageGrid& v, double tau) {
    double fit = 0.0;
    for (std::size_t i = 0; i < x.values.size(); ++i) {
        const double d = x.values[i] - v.values[i];
        fit += d * d;
    }
    return tau * total_variation(x) + 0.5 * fit;
}

ImageGrid prox_tv(const ImageGrid& v, double tau, std::size_t inner_iters) {
    if (tau <= 0.0) return v;
    const double step = 0.249;

    // Dual variables p = (pr, pc), |p| <= 1 pointwise; x = v - tau * div p.
    ImageGrid pr(v.h, v.w), pc(v.h, v.w);
    ImageGrid gr(v.h, v.w), gc(v.h, v.w);
    for (std::size_t it = 0; it < inner_iters; ++it) {
        ImageGrid d = div2d(pr, pc);
        for (std::size_t i = 0; i < d.values.size(); ++i)
            d.values[i] -= v.values[i] / tau;
        grad2d(d, gr, gc);
        for (std::size_t i = 0; i < pr.values.size(); ++i) {
            const double a = pr.values[i] + step * gr.values[i];
            const double b = pc.values[i] + step * gc.values[i];
            const double mag = std::sqrt(a * a + b * b);
            const double den = mag > 1.0 ? mag : 1.0;
            pr.values[i] = a / den;
            pc.values[i] = b / den;
        }
    }
    ImageGrid d = div2d(pr, pc);
    ImageGrid out(v.h, v.w);
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = v.values[i] - tau * d.values[i];
    return out;
}

} // namespace deqmpi
