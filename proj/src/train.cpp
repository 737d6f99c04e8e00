#include "deqmpi/train.hpp"

#include <cmath>
#include <ostream>

#include "deqmpi/metrics.hpp"
#include "deqmpi/parallel.hpp"
#include "deqmpi/rng.hpp"

namespace deqmpi {

void adam_step(ParamStore& params, AdamState& st, double lr, double beta1, double beta2,
               double adam_eps) {
    ++st.t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
    for (auto& e : params.items()) {
        AdamState::Slot& slot = st.slots[e.name];
        if (slot.m.size() != e.weight.data.size()) {
            slot.m.assign(e.weight.data.size(), 0.0);
            slot.v.assign(e.weight.data.size(), 0.0);
        }
        for (std::size_t i = 0; i < e.weight.data.size(); ++i) {
            const double g = e.grad.data[i];
            slot.m[i] = beta1 * slot.m[i] + (1.0 - beta1) * g;
            slot.v[i] = beta2 * slot.v[i] + (1.0 - beta2) * g * g;
            const double mh = slot.m[i] / bc1;
            const double vh = slot.v[i] / bc2;
            e.weight.data[i] -= lr * mh / (std::sqrt(vh) + adam_eps);
        }
    }
}

DeqInferOptions infer_options(const TrainConfig& cfg, bool learned_lc) {
    DeqInferOptions o;
    o.anderson = cfg.anderson;
    o.rdn = cfg.rdn;
    o.lc = cfg.lc;
    o.learned_lc = learned_lc;
    o.eps = cfg.eps > 0.0 ? cfg.eps : -1.0;
    return o;
}

double l1_loss(const Vector& x, const Vector& ref, Vector* grad) {
    if (x.size() != ref.size()) throw shape_error("l1_loss: length mismatch");
    const double inv = 1.0 / static_cast<double>(x.size());
    double loss = 0.0;
    if (grad) grad->assign(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - ref[i];
        loss += std::abs(d);
        if (grad) (*grad)[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
    }
    return loss * inv;
}

std::uint64_t eval_noise_seed(std::size_t index) {
    return Rng::mix(0xea51u, static_cast<std::uint64_t>(index));
}

namespace {

std::uint64_t step_seed(std::uint64_t base, std::size_t epoch, std::size_t idx) {
    return Rng::mix(Rng::mix(base, 0x57e9 + epoch), idx);
}

void log_epoch(std::ostream* log, const char* variant, const EpochLog& e) {
    if (!log) return;
    (*log) << "{\"event\":\"epoch\",\"variant\":\"" << variant << "\",\"epoch\":" << e.epoch
           << ",\"train_loss\":" << e.train_loss << ",\"val_psnr\":" << e.val_psnr
           << ",\"skipped\":" << e.skipped << "}\n";
    log->flush();
}

struct ItemResult {
    double loss = 0.0;
    bool skipped = false;
    ParamStore grads; // weights unused, grad slots carry the contribution
};

/// Shared batch driver: runs `item` over the batch in parallel, then folds
/// gradients in index order and takes one optimizer step.
double run_batch(ParamStore& params, AdamState& adam, const TrainConfig& cfg,
                 std::size_t batch_lo, std::size_t batch_hi,
                 const std::function<void(std::size_t, ParamStore&, ItemResult&)>& item,
                 std::size_t& skipped) {
    const std::size_t bs = batch_hi - batch_lo;
    std::vector<ItemResult> results(bs);
    parallel_for(bs, cfg.threads, [&](std::size_t i) {
        results[i].grads = params; // clone for thread-local accumulation
        results[i].grads.zero_grads();
        item(batch_lo + i, results[i].grads, results[i]);
    });
    params.zero_grads();
    double loss = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < bs; ++i) {
        if (results[i].skipped) {
            ++skipped;
            continue;
        }
        loss += results[i].loss;
        ++used;
    }
    if (used == 0) return 0.0;
    const double scale = 1.0 / static_cast<double>(used);
    for (std::size_t i = 0; i < bs; ++i)
        if (!results[i].skipped) params.accumulate_grads(results[i].grads, scale);
    adam_step(params, adam, cfg.lr, cfg.beta1, cfg.beta2);
    return loss * scale;
}

double validation_psnr_rdn_only(const std::vector<ImageGrid>& val, const ParamStore& params,
                                const TrainConfig& cfg) {
    if (val.empty()) return 0.0;
    std::vector<double> scores(val.size());
    parallel_for(val.size(), cfg.threads, [&](std::size_t i) {
        Rng rng(eval_noise_seed(i));
        Vector noisy = val[i].values;
        for (double& v : noisy) v += cfg.sigma1 * rng.normal();
        const Tensor out = rdn_forward(
            Tensor::from_image(ImageGrid(val[i].h, val[i].w, std::move(noisy))), params, cfg.rdn);
        scores[i] = psnr(out.to_image(), val[i]);
    });
    double s = 0.0;
    for (double v : scores) s += v;
    return s / static_cast<double>(scores.size());
}

} // namespace

ParamStore pretrain_rdn(const std::vector<ImageGrid>& train, const TrainConfig& cfg,
                        std::ostream* log) {
    cfg.validate();
    ParamStore params = rdn_init_params(cfg.rdn, cfg.seed);
    AdamState adam;
    TrainResult result;
    for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t batches = 0, skipped = 0;
        for (std::size_t lo = 0; lo < train.size(); lo += cfg.batch, ++batches) {
            const std::size_t hi = std::min(train.size(), lo + cfg.batch);
            loss_sum += run_batch(
                params, adam, cfg, lo, hi,
                [&](std::size_t idx, ParamStore& grads, ItemResult& out) {
                    Rng rng(step_seed(cfg.seed, epoch, idx));
                    const ImageGrid& ref = train[idx];
                    Vector noisy = ref.values;
                    for (double& v : noisy) v += cfg.sigma1 * rng.normal();
                    RdnWorkspace ws;
                    const Tensor y = rdn_forward(
                        Tensor::from_image(ImageGrid(ref.h, ref.w, std::move(noisy))), params,
                        cfg.rdn, &ws);
                    Vector g;
                    out.loss = l1_loss(y.data, ref.values, &g);
                    Tensor up(1, 1, ref.h, ref.w);
                    up.data = std::move(g);
                    (void)rdn_vjp(ws, up, params, cfg.rdn, &grads);
                },
                skipped);
        }
        EpochLog e{epoch + 1, loss_sum / std::max<std::size_t>(batches, 1),
                   validation_psnr_rdn_only(train, params, cfg), skipped};
        log_epoch(log, "pretrain-rdn", e);
    }
    return params;
}

ParamStore pretrain_lc(const SystemMatrix& data_sm, const LcLayout& layout,
                       const std::vector<ImageGrid>& train, const TrainConfig& cfg,
                       std::ostream* log) {
    cfg.validate();
    ParamStore params = lc_init_params(cfg.lc, cfg.seed);
    AdamState adam;
    const std::size_t m2 = data_sm.stacked_rows();
    const double eps = cfg.eps > 0.0 ? cfg.eps : std::sqrt(static_cast<double>(m2));
    const double snr_lin = std::pow(10.0, cfg.snr_db / 20.0);

    for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t batches = 0, skipped = 0;
        for (std::size_t lo = 0; lo < train.size(); lo += cfg.batch, ++batches) {
            const std::size_t hi = std::min(train.size(), lo + cfg.batch);
            loss_sum += run_batch(
                params, adam, cfg, lo, hi,
                [&](std::size_t idx, ParamStore& grads, ItemResult& out) {
                    Rng rng(step_seed(cfg.seed ^ 0x1c, epoch, idx));
                    Vector clean = matvec(data_sm.stacked, train[idx].values);
                    // Whiten to the nominal scale of the training SNR so the
                    // block sees inference-like statistics.
                    const double nominal =
                        norm2(clean) / (std::sqrt(static_cast<double>(m2)) * snr_lin);
                    if (nominal <= 0.0) {
                        out.skipped = true;
                        return;
                    }
                    for (double& v : clean) v /= nominal;
                    const double rms = snr_lin; // per-entry RMS after whitening
                    Vector y_n = clean, v_n = clean;
                    for (double& v : y_n) v += cfg.sigma2 * rms * rng.normal();
                    for (double& v : v_n) v += cfg.sigma3 * rms * rng.normal();
                    const Vector target = proj_l2_ball(v_n, y_n, eps);
                    LcWorkspace ws;
                    const Vector z = lc_forward(v_n, y_n, eps, params, cfg.lc, layout, &ws);
                    Vector g;
                    out.loss = l1_loss(z, target, &g);
                    (void)lc_vjp(ws, g, params, cfg.lc, layout, &grads);
                },
                skipped);
        }
        EpochLog e{epoch + 1, loss_sum / std::max<std::size_t>(batches, 1), 0.0, skipped};
        log_epoch(log, "pretrain-lc", e);
    }
    return params;
}

double mean_psnr_deq(const TrainProblem& prob, const std::vector<ImageGrid>& imgs,
                     const ParamStore& params, const TrainConfig& cfg, bool learned_lc) {
    if (imgs.empty()) return 0.0;
    const DeqInferOptions opts = infer_options(cfg, learned_lc);
    std::vector<double> scores(imgs.size());
    parallel_for(imgs.size(), cfg.threads, [&](std::size_t i) {
        const Measurement meas =
            emulate_measurement(*prob.data_sm, imgs[i], cfg.snr_db, eval_noise_seed(i));
        const ImageGrid rec = deq_infer(*prob.recon, meas, params, opts);
        scores[i] = psnr(rec, imgs[i]);
    });
    double s = 0.0;
    for (double v : scores) s += v;
    return s / static_cast<double>(scores.size());
}

TrainResult train_deq(const TrainProblem& prob, const std::vector<ImageGrid>& train,
                      const std::vector<ImageGrid>& val, const TrainConfig& cfg, ParamStore init,
                      bool learned_lc, std::ostream* log) {
    cfg.validate();
    TrainResult result;
    result.params = std::move(init);
    AdamState adam;
    const DeqInferOptions opts = infer_options(cfg, learned_lc);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t batches = 0, skipped = 0;
        for (std::size_t lo = 0; lo < train.size(); lo += cfg.batch, ++batches) {
            const std::size_t hi = std::min(train.size(), lo + cfg.batch);
            loss_sum += run_batch(
                result.params, adam, cfg, lo, hi,
                [&](std::size_t idx, ParamStore& grads, ItemResult& out) {
                    const Measurement meas = emulate_measurement(
                        *prob.data_sm, train[idx], cfg.snr_db, step_seed(cfg.seed, epoch, idx));
                    try {
                        const DeqSolveResult solved =
                            deq_solve(*prob.recon, meas, result.params, opts);
                        Vector g;
                        out.loss = l1_loss(solved.state.x, train[idx].values, &g);
                        implicit_backward(solved, *prob.recon, result.params, opts, g, &grads);
                    } catch (const divergence_error&) {
                        out.skipped = true;
                    }
                },
                skipped);
        }
        EpochLog e{epoch + 1, loss_sum / std::max<std::size_t>(batches, 1),
                   mean_psnr_deq(prob, val, result.params, cfg, learned_lc), skipped};
        result.log.push_back(e);
        log_epoch(log, learned_lc ? "train-deq" : "train-deq-noLc", e);
    }
    return result;
}

namespace {

struct UnrolledPass {
    DeqState final_state;
    std::vector<HWorkspace> ws;
};

UnrolledPass unrolled_forward(const SmOperator& op, const Measurement& meas,
                              const ParamStore& params, const TrainConfig& cfg,
                              std::size_t n_iters, const DeqInferOptions& opts, HContext& ctx,
                              DeqSolveResult& scratch, bool record) {
    // Reuse the whitening path of deq_solve by constructing the pieces here.
    const double scale = meas.noise_std ? 1.0 / *meas.noise_std : 1.0;
    scratch.sm_w = op.sm;
    if (scale != 1.0)
        for (double& v : scratch.sm_w.stacked.data) v *= scale;
    scratch.y_w = scaled(meas.data, scale);
    scratch.eps = opts.eps >= 0.0
                      ? opts.eps
                      : (meas.noise_std ? std::sqrt(static_cast<double>(scratch.y_w.size())) : 0.0);
    DenseMatrix normal = op.gram;
    for (double& v : normal.data) v *= scale * scale;
    for (std::size_t i = 0; i < normal.rows; ++i) normal.at(i, i) += 1.0;
    scratch.chol = CholeskyFactor::factor(normal);

    ctx.sm = &scratch.sm_w;
    ctx.y = &scratch.y_w;
    ctx.eps = scratch.eps;
    ctx.params = &params;
    ctx.chol = &scratch.chol;
    ctx.layout = &op.layout;
    ctx.rdn_cfg = cfg.rdn;
    ctx.lc_cfg = cfg.lc;
    ctx.learned_lc = false;

    UnrolledPass pass;
    DeqState st;
    st.x = op.pinv->apply(meas.data);
    st.d0.assign(scratch.y_w.size(), 0.0);
    st.d1.assign(st.x.size(), 0.0);
    if (record) pass.ws.resize(n_iters);
    for (std::size_t k = 0; k < n_iters; ++k)
        st = h_theta(st, ctx, record ? &pass.ws[k] : nullptr);
    pass.final_state = std::move(st);
    return pass;
}

} // namespace

ImageGrid unrolled_infer(const SmOperator& op, const Measurement& meas, const ParamStore& params,
                         const TrainConfig& cfg, std::size_t n_iters) {
    const DeqInferOptions opts = infer_options(cfg, false);
    HContext ctx;
    DeqSolveResult scratch;
    UnrolledPass pass = unrolled_forward(op, meas, params, cfg, n_iters, opts, ctx, scratch, false);
    return clamp_nonneg(ImageGrid(op.sm.grid_h, op.sm.grid_w, pass.final_state.x));
}

TrainResult train_unrolled(const TrainProblem& prob, const std::vector<ImageGrid>& train,
                           const std::vector<ImageGrid>& val, const TrainConfig& cfg,
                           ParamStore init, std::ostream* log) {
    cfg.validate();
    TrainResult result;
    result.params = std::move(init);
    AdamState adam;
    const DeqInferOptions opts = infer_options(cfg, false);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t batches = 0, skipped = 0;
        for (std::size_t lo = 0; lo < train.size(); lo += cfg.batch, ++batches) {
            const std::size_t hi = std::min(train.size(), lo + cfg.batch);
            loss_sum += run_batch(
                result.params, adam, cfg, lo, hi,
                [&](std::size_t idx, ParamStore& grads, ItemResult& out) {
                    const Measurement meas = emulate_measurement(
                        *prob.data_sm, train[idx], cfg.snr_db, step_seed(cfg.seed, epoch, idx));
                    HContext ctx;
                    DeqSolveResult scratch;
                    UnrolledPass pass = unrolled_forward(*prob.recon, meas, result.params, cfg,
                                                         cfg.unroll_iters, opts, ctx, scratch,
                                                         true);
                    Vector g;
                    out.loss = l1_loss(pass.final_state.x, train[idx].values, &g);
                    DeqState up;
                    up.x = std::move(g);
                    up.d0.assign(scratch.y_w.size(), 0.0);
                    up.d1.assign(up.x.size(), 0.0);
                    for (std::size_t ki = 0; ki < cfg.unroll_iters; ++ki) {
                        const std::size_t k = cfg.unroll_iters - 1 - ki;
                        up = h_theta_vjp(pass.ws[k], ctx, up, &grads);
                    }
                },
                skipped);
        }
        double val_psnr = 0.0;
        if (!val.empty()) {
            std::vector<double> scores(val.size());
            parallel_for(val.size(), cfg.threads, [&](std::size_t i) {
                const Measurement meas =
                    emulate_measurement(*prob.data_sm, val[i], cfg.snr_db, eval_noise_seed(i));
                scores[i] = psnr(
                    unrolled_infer(*prob.recon, meas, result.params, cfg, cfg.unroll_iters),
                    val[i]);
            });
            for (double v : scores) val_psnr += v;
            val_psnr /= static_cast<double>(scores.size());
        }
        EpochLog e{epoch + 1, loss_sum / std::max<std::size_t>(batches, 1), val_psnr, skipped};
        result.log.push_back(e);
        log_epoch(log, "train-unrolled", e);
    }
    return result;
}

ImageGrid e2e_infer(const SmOperator& op, const Measurement& meas, const ParamStore& params,
                    const TrainConfig& cfg) {
    const Vector x_ls = op.pinv->apply(meas.data);
    const Tensor out = rdn_forward(Tensor::from_image(ImageGrid(op.sm.grid_h, op.sm.grid_w, x_ls)),
                                   params, cfg.rdn);
    return out.to_image();
}

TrainResult train_e2e(const TrainProblem& prob, const std::vector<ImageGrid>& train,
                      const std::vector<ImageGrid>& val, const TrainConfig& cfg, ParamStore init,
                      std::ostream* log) {
    cfg.validate();
    TrainResult result;
    result.params = std::move(init);
    AdamState adam;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t batches = 0, skipped = 0;
        for (std::size_t lo = 0; lo < train.size(); lo += cfg.batch, ++batches) {
            const std::size_t hi = std::min(train.size(), lo + cfg.batch);
            loss_sum += run_batch(
                result.params, adam, cfg, lo, hi,
                [&](std::size_t idx, ParamStore& grads, ItemResult& out) {
                    const Measurement meas = emulate_measurement(
                        *prob.data_sm, train[idx], cfg.snr_db, step_seed(cfg.seed, epoch, idx));
                    const Vector x_ls = prob.recon->pinv->apply(meas.data);
                    RdnWorkspace ws;
                    const Tensor y = rdn_forward(
                        Tensor::from_image(ImageGrid(train[idx].h, train[idx].w, x_ls)),
                        result.params, cfg.rdn, &ws);
                    Vector g;
                    out.loss = l1_loss(y.data, train[idx].values, &g);
                    Tensor up(1, 1, train[idx].h, train[idx].w);
                    up.data = std::move(g);
                    (void)rdn_vjp(ws, up, result.params, cfg.rdn, &grads);
                },
                skipped);
        }
        double val_psnr = 0.0;
        if (!val.empty()) {
            std::vector<double> scores(val.size());
            parallel_for(val.size(), cfg.threads, [&](std::size_t i) {
                const Measurement meas =
                    emulate_measurement(*prob.data_sm, val[i], cfg.snr_db, eval_noise_seed(i));
                scores[i] = psnr(e2e_infer(*prob.recon, meas, result.params, cfg), val[i]);
            });
            for (double v : scores) val_psnr += v;
            val_psnr /= static_cast<double>(scores.size());
        }
        EpochLog e{epoch + 1, loss_sum / std::max<std::size_t>(batches, 1), val_psnr, skipped};
        result.log.push_back(e);
        log_epoch(log, "train-e2e", e);
    }
    return result;
}

} // namespace deqmpi
