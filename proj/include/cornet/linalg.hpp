#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include "cornet/errors.hpp"

namespace cornet {

/// Row-major dense matrix of doubles. Column vectors are n x 1 matrices.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static DenseMatrix identity(std::size_t n);
    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static DenseMatrix column(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    bool is_square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator[](std::size_t k) { return data_[k]; }
    double operator[](std::size_t k) const { return data_[k]; }

    double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
    const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }
    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    const std::vector<double>& storage() const { return data_; }

    DenseMatrix transposed() const;

    DenseMatrix& operator+=(const DenseMatrix& other);
    DenseMatrix& operator-=(const DenseMatrix& other);
    DenseMatrix& operator*=(double s);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator*(double s, DenseMatrix a);
DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b);

/// a^T b without forming the transpose.
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
/// a b^T without forming the transpose.
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);

double frobenius_inner(const DenseMatrix& a, const DenseMatrix& b);
/// (a . b, b . b) in one pass.
std::pair<double, double> dot_and_sq(const double* a, const double* b, std::size_t n);
double frobenius_norm(const DenseMatrix& a);
double max_abs(const DenseMatrix& a);
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

/// (a + a^T) / 2
DenseMatrix sym(const DenseMatrix& a);
bool is_symmetric(const DenseMatrix& a, double tol);
void require_square(const DenseMatrix& a, const char* what);
void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what);

// ---- structural helpers ------------------------------------------------

/// Diagonal part as a matrix.
DenseMatrix dmat(const DenseMatrix& a);
/// Off-diagonal part.
DenseMatrix offmat(const DenseMatrix& a);
/// Strictly lower triangular part.
DenseMatrix strict_lower(const DenseMatrix& a);
/// Strictly lower part plus half the diagonal.
DenseMatrix half_lower(const DenseMatrix& a);
DenseMatrix diag_from_vec(std::span<const double> v);
std::vector<double> diagvec(const DenseMatrix& a);
std::vector<double> row_sums(const DenseMatrix& a);
double sum_all(const DenseMatrix& a);

// ---- linear systems ----------------------------------------------------

/// Solves a x = b with partial-pivoting LU. b may have several columns.
DenseMatrix solve(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix inverse(const DenseMatrix& a);
/// Solves l x = b for lower triangular l.
DenseMatrix solve_lower(const DenseMatrix& l, const DenseMatrix& b);
/// Solves l^T x = b for lower triangular l.
DenseMatrix solve_lower_transposed(const DenseMatrix& l, const DenseMatrix& b);

// ---- symmetric spectral calculus --------------------------------------

constexpr double kEpsPd = 1e-12;
constexpr double kSymTol = 1e-10;
constexpr int kJacobiSweeps = 30;

struct SymEig {
    std::vector<double> values;  // ascending
    DenseMatrix vectors;         // orthonormal columns
};

SymEig sym_eig(const DenseMatrix& s);

struct SymFunction {
    enum class Kind { Exp, Log, Power };
    Kind kind = Kind::Exp;
    double p = 1.0;

    static SymFunction exp() { return {Kind::Exp, 1.0}; }
    static SymFunction log() { return {Kind::Log, 1.0}; }
    static SymFunction power(double p) { return {Kind::Power, p}; }

    double value(double x) const;
    double derivative(double x) const;
    /// (f(a) - f(b)) / (a - b), evaluated without cancellation.
    double divided_difference(double a, double b) const;
    bool needs_positive() const { return kind != Kind::Exp; }
};

/// Loewner matrix of first divided differences of f at the eigenvalues.
DenseMatrix loewner(const SymFunction& f, std::span<const double> lambda);

DenseMatrix sym_fun(const SymFunction& f, const DenseMatrix& s);
DenseMatrix sym_fun(const SymFunction& f, const SymEig& eig);
/// Daleckii-Krein differential: U (L o (U^T v U)) U^T.
DenseMatrix sym_fun_diff(const SymFunction& f, const DenseMatrix& s, const DenseMatrix& v);
DenseMatrix sym_fun_diff(const SymFunction& f, const SymEig& eig, const DenseMatrix& v);
DenseMatrix sym_fun_diff(const SymEig& eig, const DenseMatrix& loewner_matrix, const DenseMatrix& v);

// ---- Cholesky ----------------------------------------------------------

DenseMatrix chol(const DenseMatrix& p);
/// Differential of chol at p in direction v (symmetric).
DenseMatrix chol_diff(const DenseMatrix& l, const DenseMatrix& v);
/// Inverse differential: l z^T + z l^T.
DenseMatrix chol_diff_inv(const DenseMatrix& l, const DenseMatrix& z);
/// Adjoint of chol: symmetric gradient w.r.t. p given the gradient w.r.t. l.
DenseMatrix chol_backward(const DenseMatrix& l, const DenseMatrix& grad_l);

// ---- unit lower triangular log/exp ------------------------------------

DenseMatrix tri_log(const DenseMatrix& k);
DenseMatrix tri_exp(const DenseMatrix& x);
/// Differential of the matrix logarithm at unit lower triangular k.
DenseMatrix tri_log_diff(const DenseMatrix& k, const DenseMatrix& xi);
/// Differential of the matrix exponential at strictly lower triangular x.
DenseMatrix tri_exp_diff(const DenseMatrix& x, const DenseMatrix& xi);
/// Adjoints of the two differentials above (full matrices, not projected).
DenseMatrix tri_log_diff_adjoint(const DenseMatrix& k, const DenseMatrix& g);
DenseMatrix tri_exp_diff_adjoint(const DenseMatrix& x, const DenseMatrix& g);

}  // namespace cornet
