#pragma once

#include <array>
#include <cstddef>
#include <string>

namespace deqmpi {

/// Field-free-line scanner model used to simulate a system matrix.
struct ScannerConfig {
    std::size_t grid_h = 13;
    std::size_t grid_w = 26;
    double voxel_mm = 2.0;
    std::size_t n_angles = 16;
    int harmonic_lo = 2;
    int harmonic_hi = 11;
    std::size_t bins_per_harmonic = 3;
    double drive_mt = 9.0;
    double gradient_tpm = 0.5;
    double particle_nm = 25.0;
    std::size_t samples_per_period = 1024;
    double row_snr_threshold = 5.0;
    double row_scale = 100.0; // max complex-row l2 norm after normalization

    void validate() const;
};

struct VesselParams {
    int max_branches = 3;
    double width_px_lo = 1.0;
    double width_px_hi = 3.0;
    double blur_sigma = 0.5;
};

struct TorusParams {
    double tube_diameter_mm = 4.0;
    double inner_diameter_mm = 1.0;
    double voxel_mm = 1.0;
    double center_offset_y_mm = 0.0;
    double center_offset_x_mm = 0.0;
};

struct DatasetSplits {
    std::size_t n_train = 4096;
    std::size_t n_val = 256;
    std::size_t n_test = 256;
    std::uint64_t train_seed = 0;
    std::uint64_t val_seed = 1u << 20;
    std::uint64_t test_seed = 2u << 20;

    void validate() const;
};

enum class PhantomKind { vessel, torus };

struct PhantomConfig {
    PhantomKind kind = PhantomKind::vessel;
    std::size_t grid_h = 13;
    std::size_t grid_w = 26;
    std::uint64_t seed = 0;
    VesselParams vessel;
    TorusParams torus;
    DatasetSplits dataset;

    void validate() const;
};

enum class Regularizer { l1, tv, hybrid };
enum class ReconMethod { l1, tv, hyb, art, deq, deq_no_lc, unrolled, e2e };

struct SolverConfig {
    Regularizer reg = Regularizer::hybrid;
    double mu = 10.0;
    double alpha1 = 0.9; // hybrid l1 weight; TV weight is 1 - alpha1
    double epsilon = 0.0; // 0 -> sqrt(stacked M) after whitening
    std::size_t n_iters = 100;
    std::size_t tv_inner_iters = 20;
    bool nonneg = true;
    double art_lambda = 1.0;
    std::size_t art_iters = 10;
    bool auto_band = true; // pick alpha1 / art_lambda from the SNR band tables

    void validate() const;
};

struct AndersonConfig {
    std::size_t m = 5;
    double beta = 1.0;
    double ridge = 1e-10;
    std::size_t max_iters = 25;
    double tol = 1e-4;

    void validate() const;
};

struct RdnConfig {
    std::size_t n_res = 4;
    std::size_t f_r = 12;
    std::size_t n_conv = 12;
    std::size_t f_s = 12;
    std::size_t kernel = 3;

    void validate() const;
};

struct LcConfig {
    std::size_t n_lc = 1;
    std::size_t f_lc = 8;
    std::size_t kernel = 5; // 1-D support along the frequency axis, odd

    void validate() const;
};

struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    std::size_t epochs = 1;
    std::size_t batch = 16;
    double snr_db = 35.0;
    double eps = 0.0; // 0 -> sqrt(stacked M) after whitening
    double sigma1 = 0.1;
    double sigma2 = 0.05;
    double sigma3 = 0.02;
    std::uint64_t seed = 1;
    std::size_t threads = 0; // 0 -> hardware concurrency
    std::size_t discrepancy_factor = 2;
    std::size_t unroll_iters = 5;
    std::size_t pretrain_epochs = 2;
    AndersonConfig anderson;
    RdnConfig rdn;
    LcConfig lc;

    void validate() const;
};

struct ExperimentConfig {
    ScannerConfig scanner;
    PhantomConfig phantom;
    SolverConfig solver;
    TrainConfig training;

    void validate() const;

    /// Named defaults mirroring the published hyperparameter tables:
    /// "paper-l1", "paper-tv", "paper-hyb", "paper-art", "paper-deq".
    static ExperimentConfig preset(const std::string& name);
};

/// Hybrid l1 weight by measurement-SNR band.
double alpha1_for_snr(double snr_db);

/// Kaczmarz Tikhonov weight by measurement-SNR band.
double art_lambda_for_snr(double snr_db);

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

ReconMethod parse_method(const std::string& name);
std::string method_name(ReconMethod m);

} // namespace deqmpi
