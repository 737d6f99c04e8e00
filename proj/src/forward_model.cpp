#include "deqmpi/forward_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "deqmpi/rng.hpp"

namespace deqmpi {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Magnetite core magnetization and body temperature scale the Langevin
// argument; only the product with gradient and distance matters.
double langevin_slope_per_mm(const ScannerConfig& cfg) {
    const double ms = 446e3;                      // A/m
    const double d = cfg.particle_nm * 1e-9;      // m
    const double vol = kPi / 6.0 * d * d * d;     // m^3
    const double moment = ms * vol;               // A m^2
    const double kbt = 1.380649e-23 * 300.0;      // J
    return moment * cfg.gradient_tpm * 1e-3 / kbt; // per mm of offset
}

double langevin(double xi) {
    const double a = std::abs(xi);
    if (a < 1e-4) return xi / 3.0 - xi * xi * xi / 45.0;
    return 1.0 / std::tanh(xi) - 1.0 / xi;
}

// Keys bicubic kernel, a = -0.5.
double cubic_weight(double t) {
    const double a = -0.5;
    const double x = std::abs(t);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
    return 0.0;
}

} // namespace

SystemMatrix simulate_sm(const ScannerConfig& cfg, std::uint64_t seed) {
    cfg.validate();

    const std::size_t H = cfg.grid_h, W = cfg.grid_w, N = H * W;
    const std::size_t B = cfg.bins_per_harmonic;
    const std::size_t P = cfg.samples_per_period;
    const std::size_t L = P * B; // DFT window covers B drive periods
    const std::size_t n_harm = static_cast<std::size_t>(cfg.harmonic_hi - cfg.harmonic_lo + 1);
    const std::size_t rows_per_angle = n_harm * B;
    const std::size_t total_rows = cfg.n_angles * rows_per_angle;

    const double slope = langevin_slope_per_mm(cfg);
    const double sweep_mm = cfg.drive_mt / cfg.gradient_tpm;

    // Line offset along the FFL normal: sinusoidal drive plus a slow focus
    // ramp of one voxel across the window, which spreads signal energy into
    // the sideband bins around each harmonic.
    std::vector<double> line_mm(L);
    for (std::size_t t = 0; t < L; ++t) {
        const double drive = sweep_mm * std::sin(2.0 * kPi * static_cast<double>(t) / P);
        const double ramp = cfg.voxel_mm * ((t + 0.5) / static_cast<double>(L) - 0.5);
        line_mm[t] = drive + ramp;
    }

    // DFT basis for the kept bins only.
    std::vector<int> bin_of_row(rows_per_angle);
    std::vector<RowLabel> label_of_row(rows_per_angle);
    {
        std::size_t idx = 0;
        for (int h = cfg.harmonic_lo; h <= cfg.harmonic_hi; ++h)
            for (std::size_t b = 0; b < B; ++b, ++idx) {
                const int off = static_cast<int>(b) - static_cast<int>((B - 1) / 2);
                bin_of_row[idx] = h * static_cast<int>(B) + off;
                label_of_row[idx] = RowLabel{h, off, 0};
            }
    }
    std::vector<double> basis_cos(rows_per_angle * L), basis_sin(rows_per_angle * L);
    for (std::size_t r = 0; r < rows_per_angle; ++r) {
        const double k = static_cast<double>(bin_of_row[r]);
        for (std::size_t t = 0; t < L; ++t) {
            const double ph = 2.0 * kPi * k * static_cast<double>(t) / static_cast<double>(L);
            basis_cos[r * L + t] = std::cos(ph);
            basis_sin[r * L + t] = -std::sin(ph);
        }
    }

    Rng rng(Rng::mix(seed, 0x5e5e5e));
    std::vector<double> gain(N);
    for (std::size_t j = 0; j < N; ++j) gain[j] = 1.0 + 0.02 * (2.0 * rng.uniform() - 1.0);

    std::vector<double> re(total_rows * N, 0.0), im(total_rows * N, 0.0);
    std::vector<double> m_t(L);
    for (std::size_t a = 0; a < cfg.n_angles; ++a) {
        const double phi = kPi * static_cast<double>(a) / static_cast<double>(cfg.n_angles);
        const double cphi = std::cos(phi), sphi = std::sin(phi);
        for (std::size_t j = 0; j < N; ++j) {
            const std::size_t r = j / W, c = j % W;
            const double x_mm = (static_cast<double>(c) - 0.5 * (W - 1)) * cfg.voxel_mm;
            const double y_mm = (static_cast<double>(r) - 0.5 * (H - 1)) * cfg.voxel_mm;
            const double u = x_mm * cphi + y_mm * sphi;
            for (std::size_t t = 0; t < L; ++t) m_t[t] = langevin(slope * (u - line_mm[t]));
            for (std::size_t rr = 0; rr < rows_per_angle; ++rr) {
                const double* bc = &basis_cos[rr * L];
                const double* bs = &basis_sin[rr * L];
                double sr = 0.0, si = 0.0;
                for (std::size_t t = 0; t < L; ++t) {
                    sr += bc[t] * m_t[t];
                    si += bs[t] * m_t[t];
                }
                // Receive voltage is the time derivative: multiply the
                // magnetization spectrum by i * k (constants folded into the
                // global row normalization below).
                const double k = static_cast<double>(bin_of_row[rr]) / static_cast<double>(L);
                const std::size_t row = a * rows_per_angle + rr;
                re[row * N + j] = gain[j] * (-k * si);
                im[row * N + j] = gain[j] * (k * sr);
            }
        }
    }

    // Normalize so the strongest complex row has l2 norm row_scale, then
    // drop rows at or below the SNR threshold (unit-noise convention).
    std::vector<double> row_norm(total_rows, 0.0);
    double max_norm = 0.0;
    for (std::size_t row = 0; row < total_rows; ++row) {
        double s = 0.0;
        for (std::size_t j = 0; j < N; ++j)
            s += re[row * N + j] * re[row * N + j] + im[row * N + j] * im[row * N + j];
        row_norm[row] = std::sqrt(s);
        max_norm = std::max(max_norm, row_norm[row]);
    }
    if (max_norm <= 0.0) throw numeric_error("simulate_sm: all rows vanished");
    const double scale = cfg.row_scale / max_norm;

    std::vector<std::size_t> kept;
    for (std::size_t row = 0; row < total_rows; ++row)
        if (row_norm[row] * scale > cfg.row_snr_threshold) kept.push_back(row);

    SystemMatrix sm;
    sm.complex_rows = kept.size();
    sm.grid_h = H;
    sm.grid_w = W;
    sm.n_angles = cfg.n_angles;
    sm.freq_bins = rows_per_angle;
    sm.stacked = DenseMatrix(2 * kept.size(), N);
    sm.row_labels.resize(kept.size());
    sm.freq_index.resize(kept.size());
    sm.row_snr.resize(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const std::size_t row = kept[i];
        const std::size_t a = row / rows_per_angle;
        const std::size_t rr = row % rows_per_angle;
        sm.row_labels[i] = label_of_row[rr];
        sm.row_labels[i].angle = static_cast<std::uint32_t>(a);
        sm.freq_index[i] = static_cast<std::uint32_t>(rr);
        sm.row_snr[i] = row_norm[row] * scale;
        for (std::size_t j = 0; j < N; ++j) {
            sm.stacked.at(i, j) = scale * re[row * N + j];
            sm.stacked.at(kept.size() + i, j) = scale * im[row * N + j];
        }
    }
    return sm;
}

DenseMatrix box_downsample_matrix(std::size_t grid_h, std::size_t grid_w, std::size_t s) {
    if (s == 0 || grid_h % s != 0 || grid_w % s != 0)
        throw shape_error("box_downsample_matrix: grid not divisible by factor");
    const std::size_t lh = grid_h / s, lw = grid_w / s;
    DenseMatrix D(lh * lw, grid_h * grid_w);
    const double wgt = 1.0 / static_cast<double>(s * s);
    for (std::size_t r = 0; r < lh; ++r)
        for (std::size_t c = 0; c < lw; ++c)
            for (std::size_t i = 0; i < s; ++i)
                for (std::size_t j = 0; j < s; ++j)
                    D.at(r * lw + c, (r * s + i) * grid_w + (c * s + j)) = wgt;
    return D;
}

DenseMatrix bicubic_upsample_matrix(std::size_t grid_h, std::size_t grid_w, std::size_t s) {
    if (s < 2) throw shape_error("bicubic_upsample_matrix: factor must be >= 2");
    const std::size_t hh = grid_h * s, hw = grid_w * s;
    DenseMatrix U(hh * hw, grid_h * grid_w);
    const auto clampi = [](long v, long n) { return std::clamp(v, 0L, n - 1); };
    for (std::size_t fr = 0; fr < hh; ++fr) {
        const double y = (fr + 0.5) / static_cast<double>(s) - 0.5;
        const long y0 = static_cast<long>(std::floor(y));
        double wy[4];
        for (int i = 0; i < 4; ++i) wy[i] = cubic_weight(y - (y0 - 1 + i));
        for (std::size_t fc = 0; fc < hw; ++fc) {
            const double x = (fc + 0.5) / static_cast<double>(s) - 0.5;
            const long x0 = static_cast<long>(std::floor(x));
            double wx[4];
            for (int j = 0; j < 4; ++j) wx[j] = cubic_weight(x - (x0 - 1 + j));
            double* row = U.row(fr * hw + fc);
            for (int i = 0; i < 4; ++i) {
                const long rr = clampi(y0 - 1 + i, static_cast<long>(grid_h));
                for (int j = 0; j < 4; ++j) {
                    const long cc = clampi(x0 - 1 + j, static_cast<long>(grid_w));
                    row[rr * static_cast<long>(grid_w) + cc] += wy[i] * wx[j];
                }
            }
        }
    }
    return U;
}

Measurement emulate_measurement(const SystemMatrix& sm, const ImageGrid& x, double snr_db,
                                std::uint64_t seed) {
    if (x.h != sm.grid_h || x.w != sm.grid_w)
        throw shape_error("emulate_measurement: image grid does not match the system matrix");
    if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
        throw config_error("emulate_measurement: snr_db must be finite or +inf");

    Measurement m;
    m.data = matvec(sm.stacked, x.values);
    if (std::isinf(snr_db)) return m;

    const double signal = norm2(m.data);
    if (signal <= 0.0)
        throw numeric_error("emulate_measurement: zero signal with finite SNR target");

    Rng rng(Rng::mix(seed, 0x4015e));
    Vector noise(m.data.size());
    for (double& v : noise) v = rng.normal();
    const double target = signal / std::pow(10.0, snr_db / 20.0);
    const double rescale = target / norm2(noise);
    for (std::size_t i = 0; i < noise.size(); ++i) m.data[i] += rescale * noise[i];
    m.snr_db = snr_db;
    m.noise_std = target / std::sqrt(static_cast<double>(m.data.size()));
    return m;
}

namespace {

// Apply an image-domain operator Op (rows-out x rows-in over voxels) to every
// stacked row of A, producing A * Op^T.
DenseMatrix apply_to_rows(const DenseMatrix& A, const DenseMatrix& op) {
    if (A.cols != op.cols) throw shape_error("apply_to_rows: operator grid mismatch");
    DenseMatrix out(A.rows, op.rows);
    for (std::size_t r = 0; r < A.rows; ++r) {
        const double* src = A.row(r);
        double* dst = out.row(r);
        for (std::size_t i = 0; i < op.rows; ++i) {
            const double* w = op.row(i);
            double s = 0.0;
            for (std::size_t j = 0; j < op.cols; ++j) s += w[j] * src[j];
            dst[i] = s;
        }
    }
    return out;
}

std::vector<double> recompute_row_snr(const SystemMatrix& sm) {
    std::vector<double> out(sm.complex_rows, 0.0);
    const std::size_t M = sm.complex_rows;
    for (std::size_t i = 0; i < M; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < sm.stacked.cols; ++j) {
            const double a = sm.stacked.at(i, j), b = sm.stacked.at(M + i, j);
            s += a * a + b * b;
        }
        out[i] = std::sqrt(s);
    }
    return out;
}

} // namespace

SystemMatrix discrepant_sm(const SystemMatrix& sm, std::size_t s) {
    if (s == 0) throw shape_error("discrepant_sm: factor must be >= 1");
    if (s == 1) return sm;
    const DenseMatrix U = bicubic_upsample_matrix(sm.grid_h, sm.grid_w, s);
    const DenseMatrix D = box_downsample_matrix(sm.grid_h * s, sm.grid_w * s, s);
    SystemMatrix out = sm;
    out.stacked = apply_to_rows(apply_to_rows(sm.stacked, U), D);
    out.row_snr = recompute_row_snr(out);
    return out;
}

SystemMatrix upsampled_sm(const SystemMatrix& sm, std::size_t s) {
    const DenseMatrix U = bicubic_upsample_matrix(sm.grid_h, sm.grid_w, s);
    SystemMatrix out = sm;
    out.grid_h = sm.grid_h * s;
    out.grid_w = sm.grid_w * s;
    out.stacked = apply_to_rows(sm.stacked, U);
    out.row_snr = recompute_row_snr(out);
    return out;
}

std::pair<SystemMatrix, Measurement> whiten_to_unit_noise(const SystemMatrix& sm,
                                                          const Measurement& y) {
    if (!y.noise_std)
        throw config_error("whiten_to_unit_noise: measurement has no recorded noise_std");
    const double s = 1.0 / *y.noise_std;
    SystemMatrix sm_w = sm;
    for (double& v : sm_w.stacked.data) v *= s;
    for (double& v : sm_w.row_snr) v *= s;
    Measurement y_w = y;
    for (double& v : y_w.data) v *= s;
    y_w.noise_std = 1.0;
    return {std::move(sm_w), std::move(y_w)};
}

} // namespace deqmpi
