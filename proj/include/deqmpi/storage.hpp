#pragma once

#include <string>
#include <vector>

#include "deqmpi/container.hpp"
#include "deqmpi/forward_model.hpp"
#include "deqmpi/tensor.hpp"

namespace deqmpi {

// ".mpir" container schemas for the pipeline artifacts.

void save_sm(const SystemMatrix& sm, const std::string& path);
SystemMatrix load_sm(const std::string& path);

void save_images(const std::vector<ImageGrid>& imgs, const std::string& path);
std::vector<ImageGrid> load_images(const std::string& path);

struct MeasurementSet {
    std::size_t stacked_rows = 0;
    std::vector<Measurement> items;
    std::vector<Vector> clean; // optional noise-free data, same order
};

void save_measurements(const MeasurementSet& ms, const std::string& path);
MeasurementSet load_measurements(const std::string& path);

/// Checkpoint: parameters plus a few bookkeeping scalars ("meta.*") and the
/// per-epoch log when present.
struct ModelFile {
    std::string kind; // "deq", "deq-noLc", "unrolled", "e2e", "rdn", "lc"
    ParamStore params;
    std::vector<double> log_train_loss;
    std::vector<double> log_val_psnr;
    double snr_db = 0.0;
};

void save_model(const ModelFile& m, const std::string& path);
ModelFile load_model(const std::string& path);

} // namespace deqmpi
