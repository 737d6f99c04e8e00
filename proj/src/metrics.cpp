#include "deqmpi/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace deqmpi {

double measurement_snr(const Vector& y_clean, const Vector& y) {
    if (y_clean.size() != y.size()) throw shape_error("measurement_snr: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        num += y_clean[i] * y_clean[i];
        const double d = y[i] - y_clean[i];
        den += d * d;
    }
    if (den == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(num / den);
}

double psnr(const ImageGrid& x, const ImageGrid& ref) {
    if (x.h != ref.h || x.w != ref.w) throw shape_error("psnr: shape mismatch");
    double peak = 0.0;
    for (double v : ref.values) peak = std::max(peak, std::abs(v));
    if (peak == 0.0) throw numeric_error("psnr: reference image is all zero");
    double err = 0.0;
    for (std::size_t i = 0; i < x.values.size(); ++i) {
        const double d = x.values[i] - ref.values[i];
        err += d * d;
    }
    if (err == 0.0) return std::numeric_limits<double>::infinity();
    const double n = static_cast<double>(x.values.size());
    return 20.0 * std::log10(std::sqrt(n) * peak / std::sqrt(err));
}

double ssim(const ImageGrid& x, const ImageGrid& ref) {
    if (x.h != ref.h || x.w != ref.w) throw shape_error("ssim: shape mismatch");
    const double L = max_value(ref);
    if (L == 0.0) throw numeric_error("ssim: reference image is all zero");
    const double c1 = (0.01 * L) * (0.01 * L);
    const double c2 = (0.03 * L) * (0.03 * L);
    const double n = static_cast<double>(x.values.size());

    double mx = 0.0, mr = 0.0;
    for (std::size_t i = 0; i < x.values.size(); ++i) {
        mx += x.values[i];
        mr += ref.values[i];
    }
    mx /= n;
    mr /= n;
    double vx = 0.0, vr = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < x.values.size(); ++i) {
        const double a = x.values[i] - mx;
        const double b = ref.values[i] - mr;
        vx += a * a;
        vr += b * b;
        cov += a * b;
    }
    vx /= n;
    vr /= n;
    cov /= n;
    return ((2.0 * mx * mr + c1) * (2.0 * cov + c2)) /
           ((mx * mx + mr * mr + c1) * (vx + vr + c2));
}

void ScoreReport::add(const ImageGrid& x, const ImageGrid& ref) {
    psnr_db.push_back(psnr(x, ref));
    ssim_val.push_back(ssim(x, ref));
}

namespace {

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
    if (v.empty()) {
        mean = sd = 0.0;
        return;
    }
    double s = 0.0;
    for (double x : v) s += x;
    mean = s / static_cast<double>(v.size());
    double q = 0.0;
    for (double x : v) q += (x - mean) * (x - mean);
    sd = std::sqrt(q / static_cast<double>(v.size()));
}

} // namespace

void ScoreReport::finalize() {
    mean_std(psnr_db, psnr_mean, psnr_std);
    mean_std(ssim_val, ssim_mean, ssim_std);
}

std::string ScoreReport::table_row(const std::string& label) const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    os << label << "\t" << psnr_mean << "\t" << psnr_std << "\t" << 100.0 * ssim_mean << "\t"
       << 100.0 * ssim_std;
    return os.str();
}

} // namespace deqmpi
