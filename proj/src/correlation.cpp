#include "cornet/correlation.hpp"

#include <cmath>

namespace cornet {

CorrelationCheck check_correlation(const DenseMatrix& m) {
    if (!m.is_square()) return CorrelationCheck::NotSquare;
    if (!is_symmetric(m, kSymTol)) return CorrelationCheck::NotSymmetric;
    for (std::size_t i = 0; i < m.rows(); ++i)
        if (std::abs(m(i, i) - 1.0) > kDiagTol) return CorrelationCheck::BadDiagonal;
    SymEig e = sym_eig(m);
    if (!e.values.empty() && e.values.front() <= kEpsPd) return CorrelationCheck::NotPositiveDefinite;
    return CorrelationCheck::Ok;
}

CorrelationMatrix CorrelationMatrix::validated(DenseMatrix m) {
    switch (check_correlation(m)) {
        case CorrelationCheck::Ok: return CorrelationMatrix(std::move(m));
        case CorrelationCheck::NotSquare: throw Error(ErrorCode::ShapeMismatch, "correlation matrix must be square");
        case CorrelationCheck::NotSymmetric: throw Error(ErrorCode::NotSymmetric, "correlation matrix not symmetric");
        case CorrelationCheck::BadDiagonal: throw Error(ErrorCode::NotCorrelation, "diagonal differs from 1");
        case CorrelationCheck::NotPositiveDefinite:
            throw Error(ErrorCode::NotPositiveDefinite, "correlation matrix not positive definite");
    }
    throw Error(ErrorCode::NotCorrelation, "invalid correlation matrix");
}

HollowSymmetric HollowSymmetric::validated(DenseMatrix m) {
    require_square(m, "HollowSymmetric");
    if (!is_symmetric(m, kSymTol)) throw Error(ErrorCode::NotSymmetric, "hollow matrix not symmetric");
    for (std::size_t i = 0; i < m.rows(); ++i)
        if (std::abs(m(i, i)) > kDiagTol) throw Error(ErrorCode::BadDiagonal, "hollow matrix has nonzero diagonal");
    return HollowSymmetric(std::move(m));
}

HollowSymmetric HollowSymmetric::project(const DenseMatrix& m) { return HollowSymmetric(offmat(sym(m))); }

RowZeroSymmetric RowZeroSymmetric::validated(DenseMatrix m) {
    require_square(m, "RowZeroSymmetric");
    if (!is_symmetric(m, kSymTol)) throw Error(ErrorCode::NotSymmetric, "row-zero matrix not symmetric");
    double scale = std::max(1.0, max_abs(m));
    for (double r : row_sums(m))
        if (std::abs(r) > 1e-10 * scale) throw Error(ErrorCode::InvalidArgument, "row sums differ from zero");
    return RowZeroSymmetric(std::move(m));
}

StrictLowerTriangular StrictLowerTriangular::validated(DenseMatrix m) {
    require_square(m, "StrictLowerTriangular");
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i; j < m.cols(); ++j)
            if (m(i, j) != 0.0) throw Error(ErrorCode::BadDiagonal, "matrix not strictly lower triangular");
    return StrictLowerTriangular(std::move(m));
}

UnitRowCholesky UnitRowCholesky::validated(DenseMatrix m) {
    require_square(m, "UnitRowCholesky");
    for (std::size_t i = 0; i < m.rows(); ++i) {
        if (!(m(i, i) > 0.0)) throw Error(ErrorCode::NonPositiveDiagonal, "Cholesky diagonal must be positive");
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j > i && m(i, j) != 0.0) throw Error(ErrorCode::InvalidArgument, "factor not lower triangular");
            s += m(i, j) * m(i, j);
        }
        if (std::abs(s - 1.0) > kDiagTol) throw Error(ErrorCode::InvalidArgument, "factor rows not unit norm");
    }
    return UnitRowCholesky(std::move(m));
}

UnitRowCholesky UnitRowCholesky::of(const CorrelationMatrix& c) { return UnitRowCholesky(chol(c.matrix())); }

CorrelationMatrix UnitRowCholesky::correlation() const {
    DenseMatrix c = matmul_nt(m_, m_);
    c = sym(c);
    for (std::size_t i = 0; i < c.rows(); ++i) c(i, i) = 1.0;
    return CorrelationMatrix::trusted(std::move(c));
}

// ---- Cor ------------------------------------------------------------------

CorrelationMatrix cor_of(const DenseMatrix& sigma) {
    require_square(sigma, "cor_of");
    if (!is_symmetric(sigma, kSymTol * std::max(1.0, max_abs(sigma))))
        throw Error(ErrorCode::NotSymmetric, "cor_of: input not symmetric");
    const std::size_t n = sigma.rows();
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(sigma(i, i) > 0.0)) throw Error(ErrorCode::NonPositiveDiagonal, "cor_of: non-positive diagonal");
        s[i] = 1.0 / std::sqrt(sigma(i, i));
    }
    DenseMatrix c(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) c(i, j) = c(j, i) = 0.5 * (sigma(i, j) + sigma(j, i)) * s[i] * s[j];
        c(i, i) = 1.0;
    }
    chol(c);  // throws NotPositiveDefinite
    return CorrelationMatrix::trusted(std::move(c));
}

DenseMatrix cor_diff(const DenseMatrix& sigma, const DenseMatrix& dsigma) {
    const std::size_t n = sigma.rows();
    DenseMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double sij = std::sqrt(sigma(i, i) * sigma(j, j));
            double cij = sigma(i, j) / sij;
            out(i, j) = dsigma(i, j) / sij - 0.5 * cij * (dsigma(i, i) / sigma(i, i) + dsigma(j, j) / sigma(j, j));
        }
    }
    return out;
}

DenseMatrix cor_backward(const DenseMatrix& sigma, const DenseMatrix& grad_c) {
    require_same_shape(sigma, grad_c, "cor_backward");
    const std::size_t n = sigma.rows();
    DenseMatrix g(n, n);
    std::vector<double> diag_acc(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double sij = std::sqrt(sigma(i, i) * sigma(j, j));
            double cij = sigma(i, j) / sij;
            g(i, j) += grad_c(i, j) / sij;
            double t = 0.5 * grad_c(i, j) * cij;
            diag_acc[i] -= t / sigma(i, i);
            diag_acc[j] -= t / sigma(j, j);
        }
    }
    for (std::size_t i = 0; i < n; ++i) g(i, i) += diag_acc[i];
    return sym(g);
}

// ---- Theta ----------------------------------------------------------------

DenseMatrix theta(const CorrelationMatrix& c) {
    DenseMatrix l = chol(c.matrix());
    for (std::size_t i = 0; i < l.rows(); ++i) {
        double d = l(i, i);
        for (std::size_t j = 0; j < i; ++j) l(i, j) /= d;
        l(i, i) = 1.0;
    }
    return l;
}

CorrelationMatrix theta_inv(const DenseMatrix& k) {
    require_square(k, "theta_inv");
    return cor_of(matmul_nt(k, k));
}

namespace {

// L^{-1} V L^{-T}
DenseMatrix whiten(const DenseMatrix& l, const DenseMatrix& v) {
    DenseMatrix a = solve_lower(l, v);
    return solve_lower(l, a.transposed());
}

}  // namespace

DenseMatrix theta_diff(const DenseMatrix& l, const DenseMatrix& th, const DenseMatrix& v) {
    DenseMatrix m = whiten(l, v);
    DenseMatrix out = th * half_lower(m);
    const std::size_t n = th.rows();
    for (std::size_t i = 0; i < n; ++i) {
        double h = 0.5 * m(i, i);
        for (std::size_t j = 0; j <= i; ++j) out(i, j) -= h * th(i, j);
    }
    return out;
}

DenseMatrix theta_diff_inv(const DenseMatrix& l, const DenseMatrix& xi) {
    const std::size_t n = l.rows();
    DenseMatrix c = matmul_nt(l, l);
    DenseMatrix lxt = matmul_nt(l, xi);  // L xi^T
    std::vector<double> dl = diagvec(l);
    std::vector<double> dx = diagvec(lxt);
    DenseMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double a = (lxt(i, j) - c(i, j) * dx[j]) * dl[j];
            double b = dl[i] * (lxt(j, i) - dx[i] * c(i, j));
            out(i, j) = a + b;
        }
    }
    return offmat(sym(out));
}

DenseMatrix theta_backward(const DenseMatrix& l, const DenseMatrix& th, const DenseMatrix& grad_theta) {
    const std::size_t n = l.rows();
    DenseMatrix g = strict_lower(grad_theta);
    DenseMatrix gm = half_lower(matmul_tn(th, g));
    DenseMatrix gtt = matmul_nt(g, th);
    for (std::size_t i = 0; i < n; ++i) gm(i, i) -= 0.5 * gtt(i, i);
    DenseMatrix a = solve_lower_transposed(l, gm);
    DenseMatrix s = solve_lower_transposed(l, a.transposed());
    return sym(s);
}

// ---- sampling -------------------------------------------------------------

CorrelationMatrix random_correlation(std::size_t n, double spread, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    DenseMatrix s(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) s(i, j) = s(j, i) = spread * nd(rng);
    return cor_of(sym_fun(SymFunction::exp(), s));
}

CorrelationMatrix random_correlation(std::size_t n, double spread, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return random_correlation(n, spread, rng);
}

// ---- bases ----------------------------------------------------------------

std::vector<HollowSymmetric> hol_basis(std::size_t m) {
    std::vector<HollowSymmetric> out;
    const double s = 1.0 / std::sqrt(2.0);
    for (std::size_t i = 1; i < m; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            DenseMatrix e(m, m);
            e(i, j) = e(j, i) = s;
            out.push_back(HollowSymmetric::validated(std::move(e)));
        }
    }
    return out;
}

std::vector<RowZeroSymmetric> rowzero_coordinate_basis(std::size_t m) {
    std::vector<RowZeroSymmetric> out;
    if (m < 2) return out;
    const std::size_t last = m - 1;
    const double s3 = 1.0 / std::sqrt(3.0);
    const double s6 = 1.0 / std::sqrt(6.0);
    for (std::size_t i = 0; i < last; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            DenseMatrix e(m, m);
            if (i == j) {
                e(i, i) = s3;
                e(i, last) = e(last, i) = -s3;
                e(last, last) = s3;
            } else {
                e(i, j) = e(j, i) = s6;
                e(i, last) = e(last, i) = -s6;
                e(j, last) = e(last, j) = -s6;
                e(last, last) = 2.0 * s6;
            }
            out.push_back(RowZeroSymmetric::validated(std::move(e)));
        }
    }
    return out;
}

std::vector<RowZeroSymmetric> rowzero_basis(std::size_t m) {
    auto raw = rowzero_coordinate_basis(m);
    std::vector<DenseMatrix> q;
    for (const auto& r : raw) {
        DenseMatrix v = r.matrix();
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : q) v -= frobenius_inner(v, b) * b;
        v *= 1.0 / frobenius_norm(v);
        q.push_back(std::move(v));
    }
    std::vector<RowZeroSymmetric> out;
    for (auto& v : q) out.push_back(RowZeroSymmetric::validated(std::move(v)));
    return out;
}

DenseMatrix project_rowzero(const DenseMatrix& r) {
    require_square(r, "project_rowzero");
    const std::size_t n = r.rows();
    std::vector<double> rs = row_sums(r);
    double total = 0.0;
    for (double v : rs) total += v;
    std::vector<double> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = (rs[i] - total / (2.0 * n)) / n;
    DenseMatrix out = r;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) -= a[i] + a[j];
    return out;
}

}  // namespace cornet
