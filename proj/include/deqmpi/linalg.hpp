#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "deqmpi/errors.hpp"

namespace deqmpi {

using Vector = std::vector<double>;

/// Dense row-major real matrix. Complex operators are stored in their
/// real-stacked form [Re(A); Im(A)], so every solver stays real-valued and
/// the plain transpose is the correct adjoint.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // row-major, rows*cols entries

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }
    double* row(std::size_t i) { return data.data() + i * cols; }

    static DenseMatrix identity(std::size_t n);
};

// Elementary vector kernels. Accumulation order is fixed (left-to-right) so
// reruns on one platform are bit-identical.
double dot(const Vector& a, const Vector& b);
double norm2(const Vector& a);
void axpy(double alpha, const Vector& x, Vector& y); // y += alpha*x
Vector scaled(const Vector& x, double alpha);

/// Dense product A*v with row-major left-to-right summation.
Vector matvec(const DenseMatrix& A, const Vector& v);

/// Transposed product A^T*v.
Vector matvec_t(const DenseMatrix& A, const Vector& v);

DenseMatrix matmul(const DenseMatrix& A, const DenseMatrix& B);
DenseMatrix transpose(const DenseMatrix& A);

/// Gram matrix A^T A (symmetric, accumulated over rows).
DenseMatrix gram(const DenseMatrix& A);

/// Lower-triangular Cholesky factor of an SPD matrix; realizes the cached
/// inverse of the normal operator (I + A^T A) used by the ADMM x-update.
class CholeskyFactor {
public:
    /// Factor an SPD matrix. Throws numeric_error if a pivot is not positive.
    static CholeskyFactor factor(const DenseMatrix& spd);

    Vector solve(const Vector& b) const;

    std::size_t size() const { return n_; }
    const std::vector<double>& lower() const { return l_; }

private:
    std::size_t n_ = 0;
    std::vector<double> l_; // row-major lower triangle, full n x n storage
};

inline Vector cholesky_solve(const CholeskyFactor& f, const Vector& b) { return f.solve(b); }

/// Truncated-SVD pseudo-inverse. Singular values below rel_tol * sigma_max
/// are discarded; the factorization is cached so repeated applications per
/// system matrix are cheap.
class TruncatedPinv {
public:
    TruncatedPinv(const DenseMatrix& A, double rel_tol);

    Vector apply(const Vector& y) const;

    std::size_t rank() const { return rank_; }
    const std::vector<double>& singular_values() const { return sigma_; }

private:
    std::size_t m_ = 0, n_ = 0, rank_ = 0;
    std::vector<double> u_;     // m x k column-major blocks kept as row-major m x k
    std::vector<double> v_;     // n x k
    std::vector<double> sigma_; // all singular values, descending
};

Vector pinv_apply(const DenseMatrix& A, const Vector& y, double rel_tol = 1e-3);

/// Singular values of A in descending order (thin SVD).
std::vector<double> singular_values(const DenseMatrix& A);

} // namespace deqmpi
