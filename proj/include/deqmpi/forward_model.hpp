#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "deqmpi/config.hpp"
#include "deqmpi/image.hpp"
#include "deqmpi/linalg.hpp"

namespace deqmpi {

struct RowLabel {
    int harmonic = 0;     // drive harmonic index
    int bin_offset = 0;   // DFT bin offset around the harmonic
    std::uint32_t angle = 0;
};

/// Frequency-domain encoding operator in real-stacked form
/// [Re(A); Im(A)] over an H x W voxel grid.
struct SystemMatrix {
    std::size_t complex_rows = 0;
    std::size_t grid_h = 0;
    std::size_t grid_w = 0;
    std::size_t n_angles = 0;
    std::size_t freq_bins = 0; // distinct (harmonic, offset) slots before row selection
    DenseMatrix stacked;       // (2 * complex_rows) x (grid_h * grid_w)
    std::vector<RowLabel> row_labels;      // per kept complex row
    std::vector<std::uint32_t> freq_index; // per kept complex row, in [0, freq_bins)
    std::vector<double> row_snr;           // per kept complex row

    std::size_t n_voxels() const { return grid_h * grid_w; }
    std::size_t stacked_rows() const { return 2 * complex_rows; }
};

/// Frequency-domain data vector in the same real-stacked layout as its
/// SystemMatrix, plus the noise metadata recorded at emulation time.
struct Measurement {
    Vector data; // length 2 * complex_rows
    std::optional<double> snr_db;
    std::optional<double> noise_std; // per-entry std of the injected noise
};

/// Langevin point-source FFL simulation. Rows are deterministic given
/// (cfg, seed); the seed perturbs per-voxel gains by +-2 percent. Rows whose
/// SNR (l2 energy against unit noise) falls at or below
/// cfg.row_snr_threshold are dropped.
SystemMatrix simulate_sm(const ScannerConfig& cfg, std::uint64_t seed);

/// Block-mean operator from an (H, W) grid down to (H/s, W/s); rows sum to 1.
DenseMatrix box_downsample_matrix(std::size_t grid_h, std::size_t grid_w, std::size_t s);

/// Separable bicubic interpolation (Keys a = -0.5, clamp-to-edge) from an
/// (H, W) grid up to (sH, sW); rows sum to 1.
DenseMatrix bicubic_upsample_matrix(std::size_t grid_h, std::size_t grid_w, std::size_t s);

/// y = A x plus white Gaussian noise rescaled exactly to the target SNR.
/// Pass snr_db = +infinity for a noise-free measurement.
Measurement emulate_measurement(const SystemMatrix& sm, const ImageGrid& x, double snr_db,
                                std::uint64_t seed);

/// Reconstruction-side operator A * U * D: every row is bicubically
/// upsampled by s and box-averaged back, so the round trip is lossy and the
/// recon operator no longer matches the data-generating one.
SystemMatrix discrepant_sm(const SystemMatrix& sm, std::size_t s);

/// A * U: rows interpolated onto the s-times finer grid (sH, sW).
SystemMatrix upsampled_sm(const SystemMatrix& sm, std::size_t s);

/// Scale A and y by 1 / noise_std so the injected noise has unit variance
/// per stacked entry; afterwards eps = sqrt(stacked M) bounds the noise norm.
std::pair<SystemMatrix, Measurement> whiten_to_unit_noise(const SystemMatrix& sm,
                                                          const Measurement& y);

} // namespace deqmpi
