#include "deqmpi/phantoms.hpp"

#include <algorithm>
#include <cmath>

#include "deqmpi/rng.hpp"

namespace deqmpi {

namespace {

struct Pt {
    double r, c;
};

void stamp_disk(ImageGrid& img, double rc, double cc, double radius) {
    const int r0 = std::max(0, static_cast<int>(std::floor(rc - radius - 1)));
    const int r1 = std::min(static_cast<int>(img.h) - 1, static_cast<int>(std::ceil(rc + radius + 1)));
    const int c0 = std::max(0, static_cast<int>(std::floor(cc - radius - 1)));
    const int c1 = std::min(static_cast<int>(img.w) - 1, static_cast<int>(std::ceil(cc + radius + 1)));
    const double r2 = radius * radius;
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) {
            const double dr = r - rc, dc = c - cc;
            if (dr * dr + dc * dc <= r2) img.at(r, c) = 1.0;
        }
}

ImageGrid blur(const ImageGrid& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int rad = 2;
    double k[2 * rad + 1];
    double ks = 0.0;
    for (int i = -rad; i <= rad; ++i) {
        k[i + rad] = std::exp(-0.5 * i * i / (sigma * sigma));
        ks += k[i + rad];
    }
    for (double& v : k) v /= ks;

    ImageGrid tmp(img.h, img.w), out(img.h, img.w);
    const int H = static_cast<int>(img.h), W = static_cast<int>(img.w);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            double s = 0.0;
            for (int i = -rad; i <= rad; ++i) {
                const int cc = c + i;
                if (cc >= 0 && cc < W) s += k[i + rad] * img.at(r, cc);
            }
            tmp.at(r, c) = s;
        }
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            double s = 0.0;
            for (int i = -rad; i <= rad; ++i) {
                const int rr = r + i;
                if (rr >= 0 && rr < H) s += k[i + rad] * tmp.at(rr, c);
            }
            out.at(r, c) = s;
        }
    return out;
}

double nonzero_fraction(const ImageGrid& img) {
    std::size_t nz = 0;
    for (double v : img.values)
        if (v > 1e-8) ++nz;
    return static_cast<double>(nz) / static_cast<double>(img.size());
}

Pt border_point(Rng& rng, std::size_t h, std::size_t w) {
    // Uniform over the four edges, half a pixel inside.
    const int side = rng.uniform_int(0, 3);
    switch (side) {
    case 0: return {0.5, rng.uniform(0.5, w - 1.5)};
    case 1: return {h - 1.5, rng.uniform(0.5, w - 1.5)};
    case 2: return {rng.uniform(0.5, h - 1.5), 0.5};
    default: return {rng.uniform(0.5, h - 1.5), w - 1.5};
    }
}

ImageGrid vessel_attempt(const PhantomConfig& spec, Rng& rng) {
    ImageGrid img(spec.grid_h, spec.grid_w);
    const double hd = static_cast<double>(spec.grid_h);
    const double wd = static_cast<double>(spec.grid_w);
    const double min_dim = std::min(hd, wd);

    const int n_branches = rng.uniform_int(1, spec.vessel.max_branches);
    for (int b = 0; b < n_branches; ++b) {
        const double width = rng.uniform(spec.vessel.width_px_lo, spec.vessel.width_px_hi);
        Pt p0 = border_point(rng, spec.grid_h, spec.grid_w);
        Pt p2{rng.uniform(1.0, hd - 2.0), rng.uniform(1.0, wd - 2.0)};
        for (int tries = 0; tries < 16; ++tries) {
            const double d = std::hypot(p2.r - p0.r, p2.c - p0.c);
            if (d >= 0.45 * min_dim) break;
            p2 = {rng.uniform(1.0, hd - 2.0), rng.uniform(1.0, wd - 2.0)};
        }
        // Control point offset perpendicular to the chord bends the tube.
        const Pt mid{0.5 * (p0.r + p2.r), 0.5 * (p0.c + p2.c)};
        const double chord = std::hypot(p2.r - p0.r, p2.c - p0.c);
        const double bend = rng.uniform(-0.35, 0.35) * chord;
        const double nr = -(p2.c - p0.c) / std::max(chord, 1e-9);
        const double nc = (p2.r - p0.r) / std::max(chord, 1e-9);
        const Pt p1{mid.r + bend * nr, mid.c + bend * nc};

        const int steps = std::max(8, static_cast<int>(3.0 * chord));
        for (int s = 0; s <= steps; ++s) {
            const double t = static_cast<double>(s) / steps;
            const double a = (1 - t) * (1 - t), bq = 2 * t * (1 - t), cq = t * t;
            const double r = a * p0.r + bq * p1.r + cq * p2.r;
            const double c = a * p0.c + bq * p1.c + cq * p2.c;
            stamp_disk(img, r, c, 0.5 * width);
        }
    }
    return blur(img, spec.vessel.blur_sigma);
}

} // namespace

ImageGrid gen_vessel(const PhantomConfig& spec) {
    if (spec.grid_h < 8 || spec.grid_w < 8)
        throw config_error("gen_vessel: grid must be at least 8x8");

    // Deterministic rejection keeps the occupied fraction in a sane band.
    for (std::uint64_t attempt = 0;; ++attempt) {
        Rng rng(Rng::mix(spec.seed, 0x7e55e1 + attempt));
        ImageGrid img = vessel_attempt(spec, rng);
        const double frac = nonzero_fraction(img);
        if (frac < 0.025 || frac > 0.38) continue;
        const double peak = max_value(img);
        const double target = rng.uniform(0.5, 1.5);
        const double scale = target / peak;
        for (double& v : img.values) v *= scale;
        return img;
    }
}

ImageGrid gen_torus(const PhantomConfig& spec) {
    const TorusParams& t = spec.torus;
    const double r_in = 0.5 * t.inner_diameter_mm;
    const double r_out = 0.5 * (t.inner_diameter_mm + t.tube_diameter_mm);
    const double fov_h = spec.grid_h * t.voxel_mm;
    const double fov_w = spec.grid_w * t.voxel_mm;
    const double cy = 0.5 * fov_h + t.center_offset_y_mm;
    const double cx = 0.5 * fov_w + t.center_offset_x_mm;
    if (cy - r_out < 0.0 || cy + r_out > fov_h || cx - r_out < 0.0 || cx + r_out > fov_w)
        throw config_error("gen_torus: annulus exceeds the field of view");

    // 0.1 mm sampling, box-averaged onto the voxel grid.
    const int sub = std::max(1, static_cast<int>(std::lround(t.voxel_mm / 0.1)));
    ImageGrid img(spec.grid_h, spec.grid_w);
    for (std::size_t r = 0; r < spec.grid_h; ++r)
        for (std::size_t c = 0; c < spec.grid_w; ++c) {
            int inside = 0;
            for (int i = 0; i < sub; ++i)
                for (int j = 0; j < sub; ++j) {
                    const double y = (r + (i + 0.5) / sub) * t.voxel_mm - cy;
                    const double x = (c + (j + 0.5) / sub) * t.voxel_mm - cx;
                    const double d = std::sqrt(x * x + y * y);
                    if (d >= r_in && d <= r_out) ++inside;
                }
            img.at(r, c) = static_cast<double>(inside) / (sub * sub);
        }
    return img;
}

ImageGrid gen_phantom(const PhantomConfig& spec) {
    return spec.kind == PhantomKind::vessel ? gen_vessel(spec) : gen_torus(spec);
}

std::vector<ImageGrid> gen_batch(const PhantomConfig& spec, std::uint64_t base_seed,
                                 std::size_t count) {
    std::vector<ImageGrid> out;
    out.reserve(count);
    PhantomConfig s = spec;
    for (std::size_t i = 0; i < count; ++i) {
        s.seed = base_seed + i;
        out.push_back(gen_phantom(s));
    }
    return out;
}

} // namespace deqmpi
