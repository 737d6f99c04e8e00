#pragma once

#include <iosfwd>
#include <unordered_map>

#include "deqmpi/deq.hpp"
#include "deqmpi/phantoms.hpp"

namespace deqmpi {

struct AdamState {
    struct Slot {
        std::vector<double> m, v;
    };
    std::unordered_map<std::string, Slot> slots;
    std::size_t t = 0;
};

/// Bias-corrected ADAM update from the gradients stored in params.
void adam_step(ParamStore& params, AdamState& st, double lr, double beta1, double beta2,
               double adam_eps = 1e-8);

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_psnr = 0.0;
    std::size_t skipped = 0;
};

struct TrainResult {
    ParamStore params;
    std::vector<EpochLog> log;
};

DeqInferOptions infer_options(const TrainConfig& cfg, bool learned_lc);

/// Mean absolute deviation and its subgradient (sign / count).
double l1_loss(const Vector& x, const Vector& ref, Vector* grad);

/// Denoiser pretraining: fit the regularizer to remove sigma1 additive noise.
ParamStore pretrain_rdn(const std::vector<ImageGrid>& train, const TrainConfig& cfg,
                        std::ostream* log = nullptr);

/// Consistency-block pretraining: mimic the unlearned eps-ball projection on
/// noise-perturbed whitened data pairs (sigma2 on y, sigma3 on v, both
/// relative to the clean data RMS).
ParamStore pretrain_lc(const SystemMatrix& data_sm, const LcLayout& layout,
                       const std::vector<ImageGrid>& train, const TrainConfig& cfg,
                       std::ostream* log = nullptr);

/// Data generation and reconstruction sides of a training problem. The
/// measurement is always emulated with data_sm; reconstruction runs on the
/// (possibly resampling-discrepant) recon operator.
struct TrainProblem {
    const SystemMatrix* data_sm = nullptr;
    const SmOperator* recon = nullptr;
};

/// Equilibrium training with implicit differentiation. learned_lc = false
/// swaps the consistency block for the unlearned projection (ablation).
TrainResult train_deq(const TrainProblem& prob, const std::vector<ImageGrid>& train,
                      const std::vector<ImageGrid>& val, const TrainConfig& cfg, ParamStore init,
                      bool learned_lc = true, std::ostream* log = nullptr);

/// Fixed-depth unrolled training with backpropagation through all
/// iterations; uses the unlearned projection for data consistency.
TrainResult train_unrolled(const TrainProblem& prob, const std::vector<ImageGrid>& train,
                           const std::vector<ImageGrid>& val, const TrainConfig& cfg,
                           ParamStore init, std::ostream* log = nullptr);

/// Direct mapping from the least-squares solution to the reference image
/// with a single regularizer block (no data consistency).
TrainResult train_e2e(const TrainProblem& prob, const std::vector<ImageGrid>& train,
                      const std::vector<ImageGrid>& val, const TrainConfig& cfg, ParamStore init,
                      std::ostream* log = nullptr);

/// Plain fixed-depth inference for the unrolled model (training-time
/// forward pass repeated verbatim).
ImageGrid unrolled_infer(const SmOperator& op, const Measurement& meas, const ParamStore& params,
                         const TrainConfig& cfg, std::size_t n_iters);

ImageGrid e2e_infer(const SmOperator& op, const Measurement& meas, const ParamStore& params,
                    const TrainConfig& cfg);

/// Deterministic per-index noise seed for validation/test emulation.
std::uint64_t eval_noise_seed(std::size_t index);

/// Mean pSNR over a dataset emulated at cfg.snr_db with fixed eval seeds.
double mean_psnr_deq(const TrainProblem& prob, const std::vector<ImageGrid>& imgs,
                     const ParamStore& params, const TrainConfig& cfg, bool learned_lc);

} // namespace deqmpi
