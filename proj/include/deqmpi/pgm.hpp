#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>

#include "deqmpi/errors.hpp"
#include "deqmpi/image.hpp"

namespace deqmpi {

/// Binary PGM (P5) normalized to the image maximum; for visual inspection.
inline void write_pgm(const ImageGrid& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("write_pgm: cannot open '" + path + "'");
    f << "P5\n" << img.w << " " << img.h << "\n255\n";
    const double peak = std::max(max_value(img), 1e-30);
    for (double v : img.values) {
        const double s = std::clamp(v / peak, 0.0, 1.0);
        const auto b = static_cast<std::uint8_t>(std::lround(255.0 * s));
        f.put(static_cast<char>(b));
    }
    if (!f) throw io_error("write_pgm: short write to '" + path + "'");
}

} // namespace deqmpi
