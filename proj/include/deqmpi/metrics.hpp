#pragma once

#include <string>
#include <vector>

#include "deqmpi/image.hpp"
#include "deqmpi/linalg.hpp"

namespace deqmpi {

/// 20 log10(||y_clean|| / ||y - y_clean||); +inf when the vectors coincide.
double measurement_snr(const Vector& y_clean, const Vector& y);

/// 20 log10(sqrt(N) * max|ref| / ||x - ref||); +inf for an exact match.
double psnr(const ImageGrid& x, const ImageGrid& ref);

/// Global single-statistic SSIM with c1 = (0.01 L)^2, c2 = (0.03 L)^2,
/// L = max(ref).
double ssim(const ImageGrid& x, const ImageGrid& ref);

struct ScoreReport {
    std::vector<double> psnr_db;
    std::vector<double> ssim_val;
    double psnr_mean = 0.0, psnr_std = 0.0;
    double ssim_mean = 0.0, ssim_std = 0.0;

    void add(const ImageGrid& x, const ImageGrid& ref);
    void finalize();
    std::string table_row(const std::string& label) const;
};

} // namespace deqmpi
