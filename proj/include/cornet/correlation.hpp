#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cornet/linalg.hpp"

namespace cornet {

constexpr double kDiagTol = 1e-10;

/// Reason a matrix fails correlation validation, or Ok.
enum class CorrelationCheck { Ok, NotSquare, NotSymmetric, BadDiagonal, NotPositiveDefinite };

CorrelationCheck check_correlation(const DenseMatrix& m);

/// Full-rank correlation matrix: symmetric, unit diagonal, positive definite.
class CorrelationMatrix {
public:
    CorrelationMatrix() = default;
    /// Validates and throws NotCorrelation / NotSymmetric / NotPositiveDefinite.
    static CorrelationMatrix validated(DenseMatrix m);
    /// Wraps a matrix produced by a construction that guarantees membership.
    static CorrelationMatrix trusted(DenseMatrix m) { return CorrelationMatrix(std::move(m)); }
    static CorrelationMatrix identity(std::size_t n) { return CorrelationMatrix(DenseMatrix::identity(n)); }

    std::size_t dim() const { return m_.rows(); }
    const DenseMatrix& matrix() const { return m_; }
    double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }

private:
    explicit CorrelationMatrix(DenseMatrix m) : m_(std::move(m)) {}
    DenseMatrix m_;
};

/// Symmetric with zero diagonal; tangent vectors of Cor(n).
class HollowSymmetric {
public:
    HollowSymmetric() = default;
    static HollowSymmetric validated(DenseMatrix m);
    /// Symmetrises and zeroes the diagonal.
    static HollowSymmetric project(const DenseMatrix& m);
    static HollowSymmetric zeros(std::size_t n) { return HollowSymmetric(DenseMatrix(n, n)); }
    std::size_t dim() const { return m_.rows(); }
    const DenseMatrix& matrix() const { return m_; }

private:
    explicit HollowSymmetric(DenseMatrix m) : m_(std::move(m)) {}
    DenseMatrix m_;
};

/// Symmetric with zero row sums.
class RowZeroSymmetric {
public:
    RowZeroSymmetric() = default;
    static RowZeroSymmetric validated(DenseMatrix m);
    std::size_t dim() const { return m_.rows(); }
    const DenseMatrix& matrix() const { return m_; }

private:
    explicit RowZeroSymmetric(DenseMatrix m) : m_(std::move(m)) {}
    DenseMatrix m_;
};

/// Lower triangular with zero diagonal.
class StrictLowerTriangular {
public:
    StrictLowerTriangular() = default;
    static StrictLowerTriangular validated(DenseMatrix m);
    std::size_t dim() const { return m_.rows(); }
    const DenseMatrix& matrix() const { return m_; }

private:
    explicit StrictLowerTriangular(DenseMatrix m) : m_(std::move(m)) {}
    DenseMatrix m_;
};

/// Lower triangular, positive diagonal, unit-norm rows: the Cholesky factor of a correlation matrix.
class UnitRowCholesky {
public:
    UnitRowCholesky() = default;
    static UnitRowCholesky validated(DenseMatrix m);
    static UnitRowCholesky of(const CorrelationMatrix& c);
    std::size_t dim() const { return m_.rows(); }
    const DenseMatrix& matrix() const { return m_; }
    CorrelationMatrix correlation() const;

private:
    explicit UnitRowCholesky(DenseMatrix m) : m_(std::move(m)) {}
    DenseMatrix m_;
};

// ---- Cor and Theta --------------------------------------------------------

/// D^{-1/2} sigma D^{-1/2} with the diagonal set to exactly one.
CorrelationMatrix cor_of(const DenseMatrix& sigma);
/// Adjoint of Cor at sigma: symmetric gradient w.r.t. sigma.
DenseMatrix cor_backward(const DenseMatrix& sigma, const DenseMatrix& grad_c);
/// Differential of Cor at sigma in direction dsigma.
DenseMatrix cor_diff(const DenseMatrix& sigma, const DenseMatrix& dsigma);

/// D(L)^{-1} L with L = chol(c): unit lower triangular.
DenseMatrix theta(const CorrelationMatrix& c);
/// cor_of(k k^T).
CorrelationMatrix theta_inv(const DenseMatrix& k);
/// Differential of Theta at c (l = chol(c), th = Theta(c)).
DenseMatrix theta_diff(const DenseMatrix& l, const DenseMatrix& th, const DenseMatrix& v);
/// Inverse of theta_diff: maps a strictly lower xi to a hollow symmetric tangent.
DenseMatrix theta_diff_inv(const DenseMatrix& l, const DenseMatrix& xi);
/// Adjoint of theta_diff: symmetric gradient w.r.t. c from the gradient w.r.t. Theta(c).
DenseMatrix theta_backward(const DenseMatrix& l, const DenseMatrix& th, const DenseMatrix& grad_theta);

// ---- sampling -------------------------------------------------------------

/// cor_of(exp(spread * S)) with S symmetric, S_ij ~ N(0, 1).
CorrelationMatrix random_correlation(std::size_t n, double spread, std::uint64_t seed);
CorrelationMatrix random_correlation(std::size_t n, double spread, std::mt19937_64& rng);

// ---- orthonormal bases ----------------------------------------------------

/// Number of strictly-lower slots, m(m-1)/2.
constexpr std::size_t lower_count(std::size_t m) { return m * (m - 1) / 2; }

/// (E_ij + E_ji)/sqrt(2), i > j, row-major.
std::vector<HollowSymmetric> hol_basis(std::size_t m);
/// Orthonormal basis of row-zero symmetric matrices, obtained by Gram-Schmidt on
/// rowzero_coordinate_basis in its order.
std::vector<RowZeroSymmetric> rowzero_basis(std::size_t m);
/// Row-zero elements whose coordinates are sqrt(6) x_ij (i > j) and sqrt(3) x_ii of the
/// leading (m-1) block: (E_ii - E_im - E_mi + E_mm)/sqrt(3) and
/// (E_ij + E_ji - E_im - E_mi - E_jm - E_mj + 2 E_mm)/sqrt(6), slots (i, j), m > i >= j, row-major.
std::vector<RowZeroSymmetric> rowzero_coordinate_basis(std::size_t m);

/// Orthogonal projection of a symmetric matrix onto the row-zero subspace.
DenseMatrix project_rowzero(const DenseMatrix& r);

}  // namespace cornet
