#include "cornet/dsolvers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cornet {

namespace {

double max_abs_vec(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// H0_il = sum_jk U_ij U_ik U_lj U_lk L_jk: Jacobian of diag(exp(Y)) w.r.t. a diagonal shift.
DenseMatrix h0_matrix(const SymEig& eig, const DenseMatrix& loewner_exp) {
    const DenseMatrix& u = eig.vectors;
    const std::size_t n = u.rows();
    DenseMatrix h0(n, n);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l <= i; ++l) {
            for (std::size_t j = 0; j < n; ++j) a[j] = u(i, j) * u(l, j);
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double* lj = loewner_exp.row_ptr(j);
                double t = 0.0;
                for (std::size_t k = 0; k < n; ++k) t += lj[k] * a[k];
                s += a[j] * t;
            }
            h0(i, l) = h0(l, i) = s;
        }
    }
    return h0;
}

// Solves H0 w = rhs through its eigendecomposition, guarding the condition number.
std::vector<double> h0_solve(const DenseMatrix& h0, std::span<const double> rhs) {
    SymEig e = sym_eig(h0);
    double lo = e.values.front();
    double hi = e.values.back();
    if (!(lo > 0.0) || hi / lo > 1e12) throw Error(ErrorCode::SingularH0, "H0 condition number exceeds 1e12");
    const std::size_t n = rhs.size();
    std::vector<double> proj(n, 0.0), w(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += e.vectors(i, k) * rhs[i];
        proj[k] = s / e.values[k];
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) w[i] += e.vectors(i, k) * proj[k];
    return w;
}

}  // namespace

DplusResult dplus(const DenseMatrix& h, double tol, int max_iter) {
    require_square(h, "dplus");
    const std::size_t n = h.rows();
    DplusResult out;
    out.d.assign(n, 0.0);
    auto eval = [&](std::span<const double> d, SymEig& eig, std::vector<double>& diag) {
        DenseMatrix y = h;
        for (std::size_t i = 0; i < n; ++i) y(i, i) = d[i];
        eig = sym_eig(y);
        diag = diagvec(sym_fun(SymFunction::exp(), eig));
        double res = 0.0;
        for (double v : diag) res = std::max(res, std::abs(v - 1.0));
        return res;
    };
    SymEig eig;
    std::vector<double> e;
    double prev = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        const double res = eval(out.d, eig, e);
        out.iterations = it;
        out.residual = res;
        out.residual_history.push_back(res);
        if (res <= tol) return out;
        // Newton on log diag(exp(D + H)) once the fixed point contracts slower than 1/2 per step
        if (it > 1 && res > 0.5 * prev) {
            try {
                std::vector<double> rhs(n);
                for (std::size_t i = 0; i < n; ++i) rhs[i] = -e[i] * std::log(e[i]);
                std::vector<double> step = h0_solve(h0_matrix(eig, loewner(SymFunction::exp(), eig.values)), rhs);
                SymEig trial_eig;
                std::vector<double> trial_e, trial(n);
                bool accepted = false;
                for (double alpha = 1.0; alpha >= 1.0 / 64.0; alpha *= 0.5) {
                    for (std::size_t i = 0; i < n; ++i) trial[i] = out.d[i] + alpha * step[i];
                    if (eval(trial, trial_eig, trial_e) < res) {
                        out.d = trial;
                        prev = res;
                        accepted = true;
                        break;
                    }
                }
                if (accepted) continue;
            } catch (const Error&) {
            }
        }
        prev = res;
        for (std::size_t i = 0; i < n; ++i) out.d[i] -= std::log(e[i]);
    }
    throw Error(ErrorCode::NoConvergence, "dplus: residual " + std::to_string(out.residual) + " after " +
                                              std::to_string(max_iter) + " iterations");
}

std::vector<double> dplus_diff(const SymEig& y_eig, const DenseMatrix& w) {
    DenseMatrix lw = loewner(SymFunction::exp(), y_eig.values);
    DenseMatrix ew = sym_fun_diff(y_eig, lw, w);
    std::vector<double> rhs = diagvec(ew);
    std::vector<double> delta = h0_solve(h0_matrix(y_eig, lw), rhs);
    for (auto& v : delta) v = -v;
    return delta;
}

DenseMatrix dplus_backward(const SymEig& y_eig, const DenseMatrix& grad_y) {
    DenseMatrix g = sym(grad_y);
    DenseMatrix lw = loewner(SymFunction::exp(), y_eig.values);
    std::vector<double> w = h0_solve(h0_matrix(y_eig, lw), diagvec(g));
    DenseMatrix corr = sym_fun_diff(y_eig, lw, diag_from_vec(w));
    return offmat(sym(g - corr));
}

DenseMatrix dplus_backward(const DenseMatrix& h, std::span<const double> d, const DenseMatrix& grad_y) {
    require_square(h, "dplus_backward");
    DenseMatrix y = offmat(h);
    for (std::size_t i = 0; i < d.size(); ++i) y(i, i) = d[i];
    return dplus_backward(sym_eig(y), grad_y);
}

// ---- D* ---------------------------------------------------------------------

namespace {

std::vector<double> dstar_residual(const DenseMatrix& c, std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* ci = c.row_ptr(i);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += ci[j] * x[j];
        r[i] = s - 1.0 / x[i];
    }
    return r;
}

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// One damped Newton step; returns the accepted step length, 0 when none was accepted.
double newton_step(const DenseMatrix& c, std::vector<double>& x, const std::vector<double>& r) {
    const std::size_t n = x.size();
    DenseMatrix j = c;
    for (std::size_t i = 0; i < n; ++i) j(i, i) += 1.0 / (x[i] * x[i]);
    DenseMatrix dx = solve(j, DenseMatrix::column(r));
    double f0 = norm2(r);
    std::vector<double> xn(n);
    for (double alpha = 1.0; alpha >= 0x1p-20; alpha *= 0.5) {
        bool positive = true;
        for (std::size_t i = 0; i < n; ++i) {
            xn[i] = x[i] - alpha * dx[i];
            positive = positive && xn[i] > 0.0;
        }
        if (!positive) continue;
        if (f0 == 0.0 || norm2(dstar_residual(c, xn)) < f0) {
            x = xn;
            return alpha;
        }
    }
    return 0.0;
}

}  // namespace

DstarResult dstar(const DenseMatrix& c, DstarMode mode, double tol, int max_iter, std::span<const double> x0) {
    require_square(c, "dstar");
    const std::size_t n = c.rows();
    DstarResult out;
    if (x0.empty()) {
        out.x.assign(n, 1.0);
    } else {
        if (x0.size() != n) throw Error(ErrorCode::ShapeMismatch, "dstar: start vector length");
        out.x.assign(x0.begin(), x0.end());
    }
    std::vector<double> r = dstar_residual(c, out.x);
    out.residual = max_abs_vec(r);

    if (mode == DstarMode::Newton1) {
        out.last_step = newton_step(c, out.x, r);
        out.iterations = 1;
        out.residual = max_abs_vec(dstar_residual(c, out.x));
        return out;
    }

    while (out.residual > tol) {
        if (out.iterations >= max_iter)
            throw Error(ErrorCode::NoConvergence, "dstar: residual " + std::to_string(out.residual) + " after " +
                                                      std::to_string(max_iter) + " iterations");
        double a = newton_step(c, out.x, r);
        if (a == 0.0) throw Error(ErrorCode::DampingFailure, "dstar: no step length down to 2^-20 reduces the residual");
        out.last_step = a;
        ++out.iterations;
        r = dstar_residual(c, out.x);
        out.residual = max_abs_vec(r);
    }
    return out;
}

DenseMatrix dstar_backward(const DenseMatrix& sigma, const DenseMatrix& grad_sigma) {
    require_same_shape(sigma, grad_sigma, "dstar_backward");
    const std::size_t n = sigma.rows();
    DenseMatrix g = sym(grad_sigma);
    DenseMatrix gs = g * sigma;
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = 2.0 * gs(i, i);
    DenseMatrix ips = sigma;
    for (std::size_t i = 0; i < n; ++i) ips(i, i) += 1.0;
    DenseMatrix w = solve(ips, DenseMatrix::column(v));
    DenseMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double di = std::sqrt(sigma(i, i));
        for (std::size_t j = 0; j < n; ++j) {
            double dj = std::sqrt(sigma(j, j));
            out(i, j) = di * (g(i, j) - 0.5 * (w[i] + w[j])) * dj;
        }
    }
    return out;
}

DenseMatrix dstar_newton1_backward(const DenseMatrix& c, double step, std::span<const double> grad_x) {
    require_square(c, "dstar_newton1_backward");
    const std::size_t n = c.rows();
    if (grad_x.size() != n) throw Error(ErrorCode::ShapeMismatch, "dstar_newton1_backward: gradient length");
    if (step == 0.0) return DenseMatrix(n, n);
    DenseMatrix cpi = c;
    for (std::size_t i = 0; i < n; ++i) cpi(i, i) += 1.0;
    std::vector<double> f(n);
    std::vector<double> rs = row_sums(c);
    for (std::size_t i = 0; i < n; ++i) f[i] = rs[i] - 1.0;
    DenseMatrix a = solve(cpi, DenseMatrix::column(f));
    DenseMatrix u = solve(cpi, DenseMatrix::column(grad_x));
    DenseMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out(i, j) = -step * 0.5 * (u[i] * (1.0 - a[j]) + u[j] * (1.0 - a[i]));
    return out;
}

}  // namespace cornet
