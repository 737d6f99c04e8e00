#include "deqmpi/solvers.hpp"

#include <cmath>

namespace deqmpi {

AdmmState admm_init(const SystemMatrix& sm) {
    AdmmState st;
    st.x.assign(sm.n_voxels(), 0.0);
    st.z0.assign(sm.stacked_rows(), 0.0);
    st.z1.assign(sm.n_voxels(), 0.0);
    st.d0.assign(sm.stacked_rows(), 0.0);
    st.d1.assign(sm.n_voxels(), 0.0);
    return st;
}

CholeskyFactor admm_normal_factor(const SystemMatrix& sm) {
    DenseMatrix normal = gram(sm.stacked);
    for (std::size_t i = 0; i < normal.rows; ++i) normal.at(i, i) += 1.0;
    return CholeskyFactor::factor(normal);
}

namespace {

Vector apply_regularizer(const Vector& v, std::size_t h, std::size_t w, const SolverConfig& cfg) {
    const double tau = 1.0 / cfg.mu;
    switch (cfg.reg) {
    case Regularizer::l1:
        return prox_l1(v, tau, cfg.nonneg);
    case Regularizer::tv: {
        ImageGrid img = prox_tv(ImageGrid(h, w, v), tau, cfg.tv_inner_iters);
        if (cfg.nonneg) img = clamp_nonneg(std::move(img));
        return img.values;
    }
    case Regularizer::hybrid: {
        // Sequential composition: l1 prox, then TV prox, with the split
        // weights alpha1 and (1 - alpha1).
        Vector t = prox_l1(v, cfg.alpha1 * tau, cfg.nonneg);
        ImageGrid img = prox_tv(ImageGrid(h, w, std::move(t)), (1.0 - cfg.alpha1) * tau,
                                cfg.tv_inner_iters);
        if (cfg.nonneg) img = clamp_nonneg(std::move(img));
        return img.values;
    }
    }
    return v;
}

} // namespace

void admm_step(AdmmState& st, const SystemMatrix& sm, const Vector& y, double eps,
               const SolverConfig& cfg, const CholeskyFactor& chol) {
    const Vector ax = matvec(sm.stacked, st.x);

    Vector v0(ax.size());
    for (std::size_t i = 0; i < v0.size(); ++i) v0[i] = ax[i] - st.d0[i];
    st.z0 = proj_l2_ball(v0, y, eps);

    Vector v1(st.x.size());
    for (std::size_t i = 0; i < v1.size(); ++i) v1[i] = st.x[i] - st.d1[i];
    st.z1 = apply_regularizer(v1, sm.grid_h, sm.grid_w, cfg);

    Vector rhs_data(st.z0.size());
    for (std::size_t i = 0; i < rhs_data.size(); ++i) rhs_data[i] = st.z0[i] + st.d0[i];
    Vector rhs = matvec_t(sm.stacked, rhs_data);
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += st.z1[i] + st.d1[i];
    st.x = chol.solve(rhs);

    const Vector ax_new = matvec(sm.stacked, st.x);
    for (std::size_t i = 0; i < st.d0.size(); ++i) st.d0[i] += st.z0[i] - ax_new[i];
    for (std::size_t i = 0; i < st.d1.size(); ++i) st.d1[i] += st.z1[i] - st.x[i];
    ++st.iter;
}

ImageGrid admm_reconstruct(const SystemMatrix& sm, const Measurement& y, const SolverConfig& cfg) {
    if (y.data.size() != sm.stacked_rows())
        throw shape_error("admm_reconstruct: measurement length does not match system matrix");
    cfg.validate();
    const double eps =
        cfg.epsilon > 0.0 ? cfg.epsilon : std::sqrt(static_cast<double>(sm.stacked_rows()));

    const CholeskyFactor chol = admm_normal_factor(sm);
    AdmmState st = admm_init(sm);
    for (std::size_t k = 0; k < cfg.n_iters; ++k) admm_step(st, sm, y.data, eps, cfg, chol);
    return clamp_nonneg(ImageGrid(sm.grid_h, sm.grid_w, st.x));
}

ImageGrid art_reconstruct(const SystemMatrix& sm, const Measurement& y, double lambda,
                          std::size_t n_iters) {
    if (y.data.size() != sm.stacked_rows())
        throw shape_error("art_reconstruct: measurement length does not match system matrix");
    if (lambda < 0.0) throw config_error("art_reconstruct: lambda must be >= 0");

    const std::size_t rows = sm.stacked_rows();
    const std::size_t n = sm.n_voxels();
    std::vector<double> row_sq(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* a = sm.stacked.row(r);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += a[j] * a[j];
        row_sq[r] = s;
    }

    // Kaczmarz on the Tikhonov-augmented system [A, sqrt(lambda) I_M]; the
    // auxiliary v tracks the regularization residual per row.
    const double sl = std::sqrt(lambda);
    Vector x(n, 0.0), v(rows, 0.0);
    for (std::size_t sweep = 0; sweep < n_iters; ++sweep) {
        for (std::size_t r = 0; r < rows; ++r) {
            const double denom = row_sq[r] + lambda;
            if (denom <= 0.0) continue; // zero-norm row, nothing to project on
            const double* a = sm.stacked.row(r);
            double dotv = 0.0;
            for (std::size_t j = 0; j < n; ++j) dotv += a[j] * x[j];
            const double alpha = (y.data[r] - dotv - sl * v[r]) / denom;
            for (std::size_t j = 0; j < n; ++j) x[j] += alpha * a[j];
            v[r] += alpha * sl;
        }
        for (double& xv : x)
            if (xv < 0.0) xv = 0.0;
    }
    return ImageGrid(sm.grid_h, sm.grid_w, std::move(x));
}

} // namespace deqmpi
