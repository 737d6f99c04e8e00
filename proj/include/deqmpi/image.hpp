#pragma once

#include <cstddef>

#include "deqmpi/linalg.hpp"

namespace deqmpi {

/// Nonnegative concentration image on an h x w grid, flattened row-major.
struct ImageGrid {
    std::size_t h = 0;
    std::size_t w = 0;
    Vector values;

    ImageGrid() = default;
    ImageGrid(std::size_t h_, std::size_t w_) : h(h_), w(w_), values(h_ * w_, 0.0) {}
    ImageGrid(std::size_t h_, std::size_t w_, Vector v) : h(h_), w(w_), values(std::move(v)) {
        if (values.size() != h * w) throw shape_error("ImageGrid: value count != h*w");
    }

    double& at(std::size_t r, std::size_t c) { return values[r * w + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * w + c]; }
    std::size_t size() const { return h * w; }
};

inline double max_value(const ImageGrid& img) {
    double m = 0.0;
    for (double v : img.values)
        if (v > m) m = v;
    return m;
}

inline ImageGrid clamp_nonneg(ImageGrid img) {
    for (double& v : img.values)
        if (v < 0.0) v = 0.0;
    return img;
}

} // namespace deqmpi
