#include "cornet/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace cornet {

namespace {

std::string shape_str(const DenseMatrix& a) {
    return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

}  // namespace

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::InvalidDimension: return "InvalidDimension";
        case ErrorCode::NotSymmetric: return "NotSymmetric";
        case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorCode::NonPositiveDiagonal: return "NonPositiveDiagonal";
        case ErrorCode::NotCorrelation: return "NotCorrelation";
        case ErrorCode::BadDiagonal: return "BadDiagonal";
        case ErrorCode::SingularFactor: return "SingularFactor";
        case ErrorCode::SingularMatrix: return "SingularMatrix";
        case ErrorCode::SingularH0: return "SingularH0";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::DampingFailure: return "DampingFailure";
        case ErrorCode::Unsupported: return "Unsupported";
        case ErrorCode::InfeasibleSeparation: return "InfeasibleSeparation";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

ErrorFamily error_family(ErrorCode code) {
    switch (code) {
        case ErrorCode::IoError: return ErrorFamily::Io;
        case ErrorCode::InvalidArgument:
        case ErrorCode::ShapeMismatch:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::InvalidDimension:
        case ErrorCode::Unsupported:
        case ErrorCode::ConfigError: return ErrorFamily::Usage;
        default: return ErrorFamily::Numerical;
    }
}

// ---- DenseMatrix ------------------------------------------------------

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    std::size_t r = rows.size();
    std::size_t c = r ? rows.begin()->size() : 0;
    DenseMatrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw Error(ErrorCode::ShapeMismatch, "ragged initializer");
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

DenseMatrix DenseMatrix::column(std::span<const double> values) {
    DenseMatrix m(values.size(), 1);
    std::copy(values.begin(), values.end(), m.data_.begin());
    return m;
}

DenseMatrix DenseMatrix::transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
    require_same_shape(*this, other, "operator+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
    return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& other) {
    require_same_shape(*this, other, "operator-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
    return *this;
}

DenseMatrix& DenseMatrix::operator*=(double s) {
    for (auto& v : data_) v *= s;
    return *this;
}

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows())
        throw Error(ErrorCode::ShapeMismatch, "matmul " + shape_str(a) + " * " + shape_str(b));
    DenseMatrix c(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.row_ptr(i);
        const double* ai = a.row_ptr(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            double aik = ai[k];
            if (aik == 0.0) continue;
            const double* bk = b.row_ptr(k);
            for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows())
        throw Error(ErrorCode::ShapeMismatch, "matmul_tn " + shape_str(a) + " , " + shape_str(b));
    DenseMatrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* ak = a.row_ptr(k);
        const double* bk = b.row_ptr(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            double aki = ak[i];
            if (aki == 0.0) continue;
            double* ci = c.row_ptr(i);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols())
        throw Error(ErrorCode::ShapeMismatch, "matmul_nt " + shape_str(a) + " , " + shape_str(b));
    DenseMatrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row_ptr(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* bj = b.row_ptr(j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += ai[k] * bj[k];
            c(i, j) = s;
        }
    }
    return c;
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "hadamard");
    DenseMatrix c = a;
    for (std::size_t k = 0; k < c.size(); ++k) c[k] *= b[k];
    return c;
}

double frobenius_inner(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "frobenius_inner");
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

std::pair<double, double> dot_and_sq(const double* a, const double* b, std::size_t n) {
    double d[4] = {0, 0, 0, 0}, q[4] = {0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        for (std::size_t k = 0; k < 4; ++k) {
            d[k] += a[i + k] * b[i + k];
            q[k] += b[i + k] * b[i + k];
        }
    for (; i < n; ++i) {
        d[0] += a[i] * b[i];
        q[0] += b[i] * b[i];
    }
    return {(d[0] + d[1]) + (d[2] + d[3]), (q[0] + q[1]) + (q[2] + q[3])};
}

double frobenius_norm(const DenseMatrix& a) { return std::sqrt(frobenius_inner(a, a)); }

double max_abs(const DenseMatrix& a) {
    double m = 0.0;
    for (double v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

DenseMatrix sym(const DenseMatrix& a) {
    require_square(a, "sym");
    DenseMatrix s(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
    return s;
}

bool is_symmetric(const DenseMatrix& a, double tol) {
    if (!a.is_square()) return false;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(a(i, j) - a(j, i)) > tol) return false;
    return true;
}

void require_square(const DenseMatrix& a, const char* what) {
    if (!a.is_square()) throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": expected square, got " + shape_str(a));
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": " + shape_str(a) + " vs " + shape_str(b));
}

// ---- structural helpers ------------------------------------------------

DenseMatrix dmat(const DenseMatrix& a) {
    require_square(a, "dmat");
    DenseMatrix d(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) d(i, i) = a(i, i);
    return d;
}

DenseMatrix offmat(const DenseMatrix& a) {
    require_square(a, "offmat");
    DenseMatrix d = a;
    for (std::size_t i = 0; i < a.rows(); ++i) d(i, i) = 0.0;
    return d;
}

DenseMatrix strict_lower(const DenseMatrix& a) {
    require_square(a, "strict_lower");
    DenseMatrix d(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < i; ++j) d(i, j) = a(i, j);
    return d;
}

DenseMatrix half_lower(const DenseMatrix& a) {
    DenseMatrix d = strict_lower(a);
    for (std::size_t i = 0; i < a.rows(); ++i) d(i, i) = 0.5 * a(i, i);
    return d;
}

DenseMatrix diag_from_vec(std::span<const double> v) {
    DenseMatrix d(v.size(), v.size());
    for (std::size_t i = 0; i < v.size(); ++i) d(i, i) = v[i];
    return d;
}

std::vector<double> diagvec(const DenseMatrix& a) {
    require_square(a, "diagvec");
    std::vector<double> d(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) d[i] = a(i, i);
    return d;
}

std::vector<double> row_sums(const DenseMatrix& a) {
    std::vector<double> r(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row_ptr(i);
        r[i] = std::accumulate(ai, ai + a.cols(), 0.0);
    }
    return r;
}

double sum_all(const DenseMatrix& a) { return std::accumulate(a.data().begin(), a.data().end(), 0.0); }

// ---- linear systems ----------------------------------------------------

DenseMatrix solve(const DenseMatrix& a, const DenseMatrix& b) {
    require_square(a, "solve");
    const std::size_t n = a.rows();
    if (b.rows() != n) throw Error(ErrorCode::ShapeMismatch, "solve: rhs " + shape_str(b));
    DenseMatrix lu = a;
    DenseMatrix x = b;
    const std::size_t m = b.cols();
    double scale = std::max(max_abs(a), std::numeric_limits<double>::min());
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) piv = i;
        if (std::abs(lu(piv, k)) <= 1e-15 * scale) throw Error(ErrorCode::SingularMatrix, "solve: singular matrix");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
            for (std::size_t j = 0; j < m; ++j) std::swap(x(k, j), x(piv, j));
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            double f = lu(i, k) / lu(k, k);
            if (f == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
            for (std::size_t j = 0; j < m; ++j) x(i, j) -= f * x(k, j);
        }
    }
    for (std::size_t kk = n; kk-- > 0;) {
        for (std::size_t j = 0; j < m; ++j) {
            double s = x(kk, j);
            for (std::size_t i = kk + 1; i < n; ++i) s -= lu(kk, i) * x(i, j);
            x(kk, j) = s / lu(kk, kk);
        }
    }
    return x;
}

DenseMatrix inverse(const DenseMatrix& a) { return solve(a, DenseMatrix::identity(a.rows())); }

DenseMatrix solve_lower(const DenseMatrix& l, const DenseMatrix& b) {
    require_square(l, "solve_lower");
    const std::size_t n = l.rows();
    if (b.rows() != n) throw Error(ErrorCode::ShapeMismatch, "solve_lower: rhs " + shape_str(b));
    DenseMatrix x = b;
    for (std::size_t i = 0; i < n; ++i) {
        if (l(i, i) == 0.0) throw Error(ErrorCode::SingularFactor, "solve_lower: zero pivot");
        for (std::size_t k = 0; k < i; ++k) {
            double lik = l(i, k);
            if (lik == 0.0) continue;
            for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) -= lik * x(k, j);
        }
        for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) /= l(i, i);
    }
    return x;
}

DenseMatrix solve_lower_transposed(const DenseMatrix& l, const DenseMatrix& b) {
    require_square(l, "solve_lower_transposed");
    const std::size_t n = l.rows();
    if (b.rows() != n) throw Error(ErrorCode::ShapeMismatch, "solve_lower_transposed: rhs " + shape_str(b));
    DenseMatrix x = b;
    for (std::size_t i = n; i-- > 0;) {
        if (l(i, i) == 0.0) throw Error(ErrorCode::SingularFactor, "solve_lower_transposed: zero pivot");
        for (std::size_t k = i + 1; k < n; ++k) {
            double lki = l(k, i);
            if (lki == 0.0) continue;
            for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) -= lki * x(k, j);
        }
        for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) /= l(i, i);
    }
    return x;
}

// ---- symmetric eigendecomposition ------------------------------------

SymEig sym_eig(const DenseMatrix& s) {
    require_square(s, "sym_eig");
    const std::size_t n = s.rows();
    double scale = std::max(1.0, max_abs(s));
    if (!is_symmetric(s, kSymTol * scale)) throw Error(ErrorCode::NotSymmetric, "sym_eig: input not symmetric");

    DenseMatrix a = sym(s);
    DenseMatrix v = DenseMatrix::identity(n);
    const double eps = std::numeric_limits<double>::epsilon();
    const double floor = eps * eps * std::max(frobenius_norm(a), std::numeric_limits<double>::min());

    bool converged = n < 2;
    for (int sweep = 0; sweep < kJacobiSweeps && !converged; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = a(p, q);
                double app = a(p, p);
                double aqq = a(q, q);
                double thresh = std::max(0.5 * eps * std::sqrt(std::abs(app * aqq)), floor);
                if (std::abs(apq) <= thresh) {
                    a(p, q) = a(q, p) = 0.0;
                    continue;
                }
                rotated = true;
                double theta = (aqq - app) / (2.0 * apq);
                double t;
                if (std::abs(theta) > 1e150) {
                    t = 0.5 / theta;
                } else {
                    t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    if (theta < 0.0) t = -t;
                }
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double sn = t * c;
                double tau = sn / (1.0 + c);
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = a(q, p) = 0.0;
                for (std::size_t r = 0; r < n; ++r) {
                    if (r == p || r == q) continue;
                    double arp = a(r, p);
                    double arq = a(r, q);
                    double nrp = arp - sn * (arq + tau * arp);
                    double nrq = arq + sn * (arp - tau * arq);
                    a(r, p) = a(p, r) = nrp;
                    a(r, q) = a(q, r) = nrq;
                }
                for (std::size_t r = 0; r < n; ++r) {
                    double vrp = v(r, p);
                    double vrq = v(r, q);
                    v(r, p) = vrp - sn * (vrq + tau * vrp);
                    v(r, q) = vrq + sn * (vrp - tau * vrq);
                }
            }
        }
        converged = !rotated;
    }
    if (!converged) throw Error(ErrorCode::NoConvergence, "sym_eig: Jacobi sweep budget exhausted");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
    SymEig out;
    out.values.resize(n);
    out.vectors = DenseMatrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
    }
    return out;
}

// ---- spectral functions --------------------------------------------------

double SymFunction::value(double x) const {
    switch (kind) {
        case Kind::Exp: return std::exp(x);
        case Kind::Log: return std::log(x);
        case Kind::Power: return std::pow(x, p);
    }
    return 0.0;
}

double SymFunction::derivative(double x) const {
    switch (kind) {
        case Kind::Exp: return std::exp(x);
        case Kind::Log: return 1.0 / x;
        case Kind::Power: return p * std::pow(x, p - 1.0);
    }
    return 0.0;
}

double SymFunction::divided_difference(double a, double b) const {
    double d = a - b;
    switch (kind) {
        case Kind::Exp: return std::exp(b) * std::expm1(d) / d;
        case Kind::Log: return std::log1p(d / b) / d;
        case Kind::Power: return std::pow(b, p) * std::expm1(p * std::log1p(d / b)) / d;
    }
    return 0.0;
}

DenseMatrix loewner(const SymFunction& f, std::span<const double> lambda) {
    const std::size_t n = lambda.size();
    DenseMatrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        l(i, i) = f.derivative(lambda[i]);
        for (std::size_t j = 0; j < i; ++j) {
            double eps_pair = 1e-10 * std::max(1.0, std::abs(lambda[i]) + std::abs(lambda[j]));
            double v = std::abs(lambda[i] - lambda[j]) > eps_pair ? f.divided_difference(lambda[i], lambda[j])
                                                                    : f.derivative(lambda[i]);
            l(i, j) = l(j, i) = v;
        }
    }
    return l;
}

namespace {

void check_domain(const SymFunction& f, const SymEig& eig) {
    if (f.needs_positive() && !eig.values.empty() && eig.values.front() <= kEpsPd)
        throw Error(ErrorCode::NotPositiveDefinite,
                    "sym_fun: eigenvalue " + std::to_string(eig.values.front()) + " <= 1e-12");
}

// U diag(w) U^T
DenseMatrix reconstruct(const DenseMatrix& u, std::span<const double> w) {
    const std::size_t n = u.rows();
    DenseMatrix uw = u;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) uw(i, k) *= w[k];
    DenseMatrix r = matmul_nt(uw, u);
    return sym(r);
}

}  // namespace

DenseMatrix sym_fun(const SymFunction& f, const SymEig& eig) {
    check_domain(f, eig);
    std::vector<double> w(eig.values.size());
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = f.value(eig.values[k]);
    return reconstruct(eig.vectors, w);
}

DenseMatrix sym_fun(const SymFunction& f, const DenseMatrix& s) { return sym_fun(f, sym_eig(s)); }

DenseMatrix sym_fun_diff(const SymEig& eig, const DenseMatrix& loewner_matrix, const DenseMatrix& v) {
    const DenseMatrix& u = eig.vectors;
    require_same_shape(u, v, "sym_fun_diff");
    DenseMatrix inner = matmul_tn(u, v) * u;
    for (std::size_t k = 0; k < inner.size(); ++k) inner[k] *= loewner_matrix[k];
    return u * matmul_nt(inner, u);
}

DenseMatrix sym_fun_diff(const SymFunction& f, const SymEig& eig, const DenseMatrix& v) {
    check_domain(f, eig);
    return sym_fun_diff(eig, loewner(f, eig.values), v);
}

DenseMatrix sym_fun_diff(const SymFunction& f, const DenseMatrix& s, const DenseMatrix& v) {
    return sym_fun_diff(f, sym_eig(s), v);
}

// ---- Cholesky ----------------------------------------------------------

DenseMatrix chol(const DenseMatrix& p) {
    require_square(p, "chol");
    const std::size_t n = p.rows();
    if (!is_symmetric(p, kSymTol * std::max(1.0, max_abs(p))))
        throw Error(ErrorCode::NotSymmetric, "chol: input not symmetric");
    DenseMatrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        const double* lj = l.row_ptr(j);
        double d = p(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= lj[k] * lj[k];
        if (!(d > kEpsPd)) throw Error(ErrorCode::NotPositiveDefinite, "chol: non-positive pivot");
        double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            const double* li = l.row_ptr(i);
            double s = p(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
            l(i, j) = s / ljj;
        }
    }
    return l;
}

DenseMatrix chol_diff(const DenseMatrix& l, const DenseMatrix& v) {
    // M = L^{-1} V L^{-T}
    DenseMatrix a = solve_lower(l, v);
    DenseMatrix m = solve_lower(l, a.transposed());
    return l * half_lower(m);
}

DenseMatrix chol_diff_inv(const DenseMatrix& l, const DenseMatrix& z) {
    DenseMatrix a = matmul_nt(l, z);
    return a + a.transposed();
}

DenseMatrix chol_backward(const DenseMatrix& l, const DenseMatrix& grad_l) {
    require_same_shape(l, grad_l, "chol_backward");
    for (std::size_t i = 0; i < l.rows(); ++i)
        if (!(l(i, i) > kEpsPd)) throw Error(ErrorCode::SingularFactor, "chol_backward: tiny diagonal in factor");
    // L^{-T} half_lower(L^T G) L^{-1}, symmetrised
    DenseMatrix p = half_lower(matmul_tn(l, strict_lower(grad_l) + dmat(grad_l)));
    DenseMatrix a = solve_lower_transposed(l, p);
    DenseMatrix s = solve_lower_transposed(l, a.transposed());
    return sym(s);
}

// ---- unit lower triangular log/exp ------------------------------------

namespace {

void require_unit_lower(const DenseMatrix& k, const char* what) {
    require_square(k, what);
    for (std::size_t i = 0; i < k.rows(); ++i) {
        if (std::abs(k(i, i) - 1.0) > 1e-12) throw Error(ErrorCode::BadDiagonal, std::string(what) + ": diagonal not 1");
        for (std::size_t j = i + 1; j < k.cols(); ++j)
            if (k(i, j) != 0.0) throw Error(ErrorCode::BadDiagonal, std::string(what) + ": not lower triangular");
    }
}

void require_strict_lower(const DenseMatrix& x, const char* what) {
    require_square(x, what);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        if (std::abs(x(i, i)) > 1e-12) throw Error(ErrorCode::BadDiagonal, std::string(what) + ": diagonal not 0");
        for (std::size_t j = i + 1; j < x.cols(); ++j)
            if (x(i, j) != 0.0) throw Error(ErrorCode::BadDiagonal, std::string(what) + ": not strictly lower");
    }
}

// Product of strictly lower matrices where a vanishes below band `da` and b below `db`
// (entries with i - j < da are zero in a). Result vanishes for i - j < da + db.
DenseMatrix banded_lower_product(const DenseMatrix& a, std::size_t da, const DenseMatrix& b, std::size_t db) {
    const std::size_t n = a.rows();
    DenseMatrix c(n, n);
    for (std::size_t i = da + db; i < n; ++i) {
        double* ci = c.row_ptr(i);
        const double* ai = a.row_ptr(i);
        for (std::size_t k = db; k + da <= i; ++k) {
            double aik = ai[k];
            if (aik == 0.0) continue;
            const double* bk = b.row_ptr(k);
            for (std::size_t j = 0; j + db <= k; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

// Powers n^1 .. n^{order} of a strictly lower matrix.
std::vector<DenseMatrix> strict_powers(const DenseMatrix& x) {
    const std::size_t n = x.rows();
    std::vector<DenseMatrix> pw;
    if (n < 2) return pw;
    pw.push_back(x);
    for (std::size_t k = 2; k < n; ++k) pw.push_back(banded_lower_product(pw.back(), k - 1, x, 1));
    return pw;
}

// sum_k c_k sum_{a+b=k-1} X^a Xi X^b  via T_{k+1} = X T_k + Xi X^k
template <class Coef>
DenseMatrix nilpotent_series_diff(const DenseMatrix& x, const DenseMatrix& xi, Coef coef) {
    const std::size_t n = x.rows();
    DenseMatrix out = coef(1) * xi;
    DenseMatrix t = xi;
    DenseMatrix xk = DenseMatrix::identity(n);
    // X^a Xi X^b vanishes once a >= n or b >= n, so k <= 2n - 1.
    for (std::size_t k = 1; k + 1 < 2 * n; ++k) {
        xk = xk * x;
        t = x * t + xi * xk;
        if (max_abs(t) == 0.0) break;
        out += coef(k + 1) * t;
    }
    return out;
}

double log_coef(std::size_t k) { return (k % 2 == 1 ? 1.0 : -1.0) / static_cast<double>(k); }

}  // namespace

DenseMatrix tri_log(const DenseMatrix& k) {
    require_unit_lower(k, "tri_log");
    const std::size_t n = k.rows();
    DenseMatrix nil = strict_lower(k);
    DenseMatrix out(n, n);
    auto pw = strict_powers(nil);
    for (std::size_t p = 0; p < pw.size(); ++p) out += log_coef(p + 1) * pw[p];
    return out;
}

DenseMatrix tri_exp(const DenseMatrix& x) {
    require_strict_lower(x, "tri_exp");
    const std::size_t n = x.rows();
    DenseMatrix out = DenseMatrix::identity(n);
    auto pw = strict_powers(strict_lower(x));
    double fact = 1.0;
    for (std::size_t p = 0; p < pw.size(); ++p) {
        fact *= static_cast<double>(p + 1);
        out += (1.0 / fact) * pw[p];
    }
    return out;
}

namespace {

double inv_factorial(std::size_t k) {
    double f = 1.0;
    for (std::size_t i = 2; i <= k; ++i) f *= static_cast<double>(i);
    return 1.0 / f;
}

}  // namespace

DenseMatrix tri_log_diff(const DenseMatrix& k, const DenseMatrix& xi) {
    require_unit_lower(k, "tri_log_diff");
    return nilpotent_series_diff(strict_lower(k), xi, log_coef);
}

DenseMatrix tri_exp_diff(const DenseMatrix& x, const DenseMatrix& xi) {
    require_strict_lower(x, "tri_exp_diff");
    return nilpotent_series_diff(strict_lower(x), xi, inv_factorial);
}

DenseMatrix tri_log_diff_adjoint(const DenseMatrix& k, const DenseMatrix& g) {
    require_unit_lower(k, "tri_log_diff_adjoint");
    return nilpotent_series_diff(strict_lower(k).transposed(), g, log_coef);
}

DenseMatrix tri_exp_diff_adjoint(const DenseMatrix& x, const DenseMatrix& g) {
    require_strict_lower(x, "tri_exp_diff_adjoint");
    return nilpotent_series_diff(strict_lower(x).transposed(), g, inv_factorial);
}

}  // namespace cornet
