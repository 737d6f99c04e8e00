#include "deqmpi/linalg.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace deqmpi {

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw shape_error("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const Vector& a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

void axpy(double alpha, const Vector& x, Vector& y) {
    if (x.size() != y.size()) throw shape_error("axpy: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Vector scaled(const Vector& x, double alpha) {
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = alpha * x[i];
    return out;
}

Vector matvec(const DenseMatrix& A, const Vector& v) {
    if (A.cols != v.size())
        throw shape_error("matvec: " + std::to_string(A.rows) + "x" + std::to_string(A.cols) +
                          " against length " + std::to_string(v.size()));
    Vector out(A.rows, 0.0);
    for (std::size_t i = 0; i < A.rows; ++i) {
        const double* r = A.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < A.cols; ++j) s += r[j] * v[j];
        out[i] = s;
    }
    return out;
}

Vector matvec_t(const DenseMatrix& A, const Vector& v) {
    if (A.rows != v.size())
        throw shape_error("matvec_t: " + std::to_string(A.rows) + "x" + std::to_string(A.cols) +
                          " against length " + std::to_string(v.size()));
    Vector out(A.cols, 0.0);
    for (std::size_t i = 0; i < A.rows; ++i) {
        const double* r = A.row(i);
        const double vi = v[i];
        for (std::size_t j = 0; j < A.cols; ++j) out[j] += vi * r[j];
    }
    return out;
}

DenseMatrix matmul(const DenseMatrix& A, const DenseMatrix& B) {
    if (A.cols != B.rows) throw shape_error("matmul: inner dimension mismatch");
    DenseMatrix C(A.rows, B.cols);
    for (std::size_t i = 0; i < A.rows; ++i) {
        const double* ra = A.row(i);
        double* rc = C.row(i);
        for (std::size_t k = 0; k < A.cols; ++k) {
            const double aik = ra[k];
            if (aik == 0.0) continue;
            const double* rb = B.row(k);
            for (std::size_t j = 0; j < B.cols; ++j) rc[j] += aik * rb[j];
        }
    }
    return C;
}

DenseMatrix transpose(const DenseMatrix& A) {
    DenseMatrix T(A.cols, A.rows);
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < A.cols; ++j) T.at(j, i) = A.at(i, j);
    return T;
}

DenseMatrix gram(const DenseMatrix& A) {
    DenseMatrix G(A.cols, A.cols);
    for (std::size_t r = 0; r < A.rows; ++r) {
        const double* row = A.row(r);
        for (std::size_t i = 0; i < A.cols; ++i) {
            const double ri = row[i];
            if (ri == 0.0) continue;
            double* gi = G.row(i);
            for (std::size_t j = i; j < A.cols; ++j) gi[j] += ri * row[j];
        }
    }
    for (std::size_t i = 0; i < A.cols; ++i)
        for (std::size_t j = 0; j < i; ++j) G.at(i, j) = G.at(j, i);
    return G;
}

CholeskyFactor CholeskyFactor::factor(const DenseMatrix& spd) {
    if (spd.rows != spd.cols) throw shape_error("cholesky: matrix not square");
    const std::size_t n = spd.rows;
    CholeskyFactor f;
    f.n_ = n;
    f.l_.assign(n * n, 0.0);
    std::vector<double>& L = f.l_;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = spd.at(i, j);
            const double* li = &L[i * n];
            const double* lj = &L[j * n];
            for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
            if (i == j) {
                if (s <= 0.0 || !std::isfinite(s))
                    throw numeric_error("cholesky: matrix not positive definite at pivot " +
                                        std::to_string(i));
                L[i * n + j] = std::sqrt(s);
            } else {
                L[i * n + j] = s / L[j * n + j];
            }
        }
    }
    return f;
}

Vector CholeskyFactor::solve(const Vector& b) const {
    if (b.size() != n_) throw shape_error("cholesky_solve: length mismatch");
    Vector y(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
        double s = b[i];
        const double* li = &l_[i * n_];
        for (std::size_t k = 0; k < i; ++k) s -= li[k] * y[k];
        y[i] = s / li[i];
    }
    Vector x(n_, 0.0);
    for (std::size_t ii = 0; ii < n_; ++ii) {
        const std::size_t i = n_ - 1 - ii;
        double s = y[i];
        for (std::size_t k = i + 1; k < n_; ++k) s -= l_[k * n_ + i] * x[k];
        x[i] = s / l_[i * n_ + i];
    }
    return x;
}

namespace {

Eigen::MatrixXd to_eigen(const DenseMatrix& A) {
    Eigen::MatrixXd M(static_cast<Eigen::Index>(A.rows), static_cast<Eigen::Index>(A.cols));
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < A.cols; ++j)
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = A.at(i, j);
    return M;
}

} // namespace

TruncatedPinv::TruncatedPinv(const DenseMatrix& A, double rel_tol) {
    if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw config_error("pinv: rel_tol must be in (0,1)");
    m_ = A.rows;
    n_ = A.cols;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(to_eigen(A), Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw numeric_error("pinv: SVD did not converge");
    const auto& s = svd.singularValues();
    sigma_.assign(s.data(), s.data() + s.size());
    const double cutoff = sigma_.empty() ? 0.0 : rel_tol * sigma_[0];
    rank_ = 0;
    while (rank_ < sigma_.size() && sigma_[rank_] > cutoff) ++rank_;
    u_.resize(m_ * rank_);
    v_.resize(n_ * rank_);
    for (std::size_t k = 0; k < rank_; ++k) {
        for (std::size_t i = 0; i < m_; ++i)
            u_[i * rank_ + k] = svd.matrixU()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        for (std::size_t j = 0; j < n_; ++j)
            v_[j * rank_ + k] = svd.matrixV()(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
    }
}

Vector TruncatedPinv::apply(const Vector& y) const {
    if (y.size() != m_) throw shape_error("pinv_apply: length mismatch");
    std::vector<double> c(rank_, 0.0); // c = S^-1 U^T y over the kept subspace
    for (std::size_t i = 0; i < m_; ++i) {
        const double yi = y[i];
        const double* ui = &u_[i * rank_];
        for (std::size_t k = 0; k < rank_; ++k) c[k] += ui[k] * yi;
    }
    for (std::size_t k = 0; k < rank_; ++k) c[k] /= sigma_[k];
    Vector x(n_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
        const double* vj = &v_[j * rank_];
        double s = 0.0;
        for (std::size_t k = 0; k < rank_; ++k) s += vj[k] * c[k];
        x[j] = s;
    }
    return x;
}

Vector pinv_apply(const DenseMatrix& A, const Vector& y, double rel_tol) {
    return TruncatedPinv(A, rel_tol).apply(y);
}

std::vector<double> singular_values(const DenseMatrix& A) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(to_eigen(A));
    const auto& s = svd.singularValues();
    return std::vector<double>(s.data(), s.data() + s.size());
}

} // namespace deqmpi
