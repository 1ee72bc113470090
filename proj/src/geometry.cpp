#include "cornet/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace cornet {

std::string_view metric_name(MetricKind m) {
    switch (m) {
        case MetricKind::ECM: return "ECM";
        case MetricKind::LECM: return "LECM";
        case MetricKind::OLM: return "OLM";
        case MetricKind::LSM: return "LSM";
        case MetricKind::PHCM: return "PHCM";
    }
    return "?";
}

std::optional<MetricKind> parse_metric(std::string_view s) {
    for (MetricKind m : kAllMetrics) {
        const auto name = metric_name(m);
        if (name.size() == s.size() &&
            std::equal(name.begin(), name.end(), s.begin(), [](char a, char b) { return a == std::toupper(b); }))
            return m;
    }
    return std::nullopt;
}

namespace {

[[noreturn]] void no_log_euclidean(MetricKind m) {
    throw Error(ErrorCode::Unsupported, std::string(metric_name(m)) + " has no Log-Euclidean operator");
}

DenseMatrix exp_of(const SymEig& e) { return sym_fun(SymFunction::exp(), e); }

DenseMatrix lsm_sigma(const DenseMatrix& c, std::span<const double> x) {
    const std::size_t n = c.rows();
    DenseMatrix s(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) s(i, j) = x[i] * c(i, j) * x[j];
    return sym(s);
}

CorrelationMatrix unit_diag(DenseMatrix m) {
    m = sym(m);
    for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) = 1.0;
    return CorrelationMatrix::trusted(std::move(m));
}

// Cor() without validation, for outputs known to be positive definite.
CorrelationMatrix cor_trusted(const DenseMatrix& s) {
    const std::size_t n = s.rows();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = 1.0 / std::sqrt(s(i, i));
    DenseMatrix c(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) c(i, j) = c(j, i) = 0.5 * (s(i, j) + s(j, i)) * d[i] * d[j];
        c(i, i) = 1.0;
    }
    return CorrelationMatrix::trusted(std::move(c));
}

}  // namespace

PrototypeVector PrototypeVector::validated(MetricKind metric, DenseMatrix payload) {
    switch (metric) {
        case MetricKind::ECM:
        case MetricKind::LECM: StrictLowerTriangular::validated(payload); break;
        case MetricKind::OLM: HollowSymmetric::validated(payload); break;
        case MetricKind::LSM: RowZeroSymmetric::validated(payload); break;
        case MetricKind::PHCM: no_log_euclidean(metric);
    }
    return PrototypeVector{metric, std::move(payload)};
}

// ---- phi ---------------------------------------------------------------------

PhiEval phi_eval(MetricKind metric, const CorrelationMatrix& c, const SolverOptions& opts) {
    PhiEval ev;
    ev.metric = metric;
    ev.c = c.matrix();
    ev.value.metric = metric;
    switch (metric) {
        case MetricKind::ECM:
        case MetricKind::LECM: {
            ev.chol_l = chol(c.matrix());
            ev.theta_k = ev.chol_l;
            for (std::size_t i = 0; i < ev.theta_k.rows(); ++i) {
                double d = ev.theta_k(i, i);
                for (std::size_t j = 0; j < i; ++j) ev.theta_k(i, j) /= d;
                ev.theta_k(i, i) = 1.0;
            }
            ev.value.payload = metric == MetricKind::ECM ? strict_lower(ev.theta_k) : tri_log(ev.theta_k);
            break;
        }
        case MetricKind::OLM: {
            ev.eig = sym_eig(c.matrix());
            ev.value.payload = offmat(sym_fun(SymFunction::log(), ev.eig));
            break;
        }
        case MetricKind::LSM: {
            ev.mode = opts.dstar_mode;
            DstarResult r = dstar(c.matrix(), opts.dstar_mode, opts.dstar_tol, opts.dstar_max_iter);
            ev.x = r.x;
            ev.step = r.last_step;
            ev.sigma = lsm_sigma(c.matrix(), ev.x);
            ev.eig = sym_eig(ev.sigma);
            DenseMatrix r0 = sym_fun(SymFunction::log(), ev.eig);
            ev.value.payload = opts.dstar_mode == DstarMode::Newton1 ? project_rowzero(r0) : r0;
            break;
        }
        case MetricKind::PHCM: no_log_euclidean(metric);
    }
    return ev;
}

DenseMatrix phi_vjp(const PhiEval& ev, const DenseMatrix& grad_proto) {
    switch (ev.metric) {
        case MetricKind::ECM: return theta_backward(ev.chol_l, ev.theta_k, strict_lower(grad_proto));
        case MetricKind::LECM: {
            DenseMatrix gk = strict_lower(tri_log_diff_adjoint(ev.theta_k, strict_lower(grad_proto)));
            return theta_backward(ev.chol_l, ev.theta_k, gk);
        }
        case MetricKind::OLM:
            return sym_fun_diff(SymFunction::log(), ev.eig, offmat(sym(grad_proto)));
        case MetricKind::LSM: {
            DenseMatrix g = sym(grad_proto);
            if (ev.mode == DstarMode::Newton1) g = project_rowzero(g);
            DenseMatrix gs = sym_fun_diff(SymFunction::log(), ev.eig, g);
            if (ev.mode == DstarMode::Full) return dstar_backward(ev.sigma, gs);
            const std::size_t n = ev.c.rows();
            DenseMatrix gc(n, n);
            std::vector<double> gx(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    gc(i, j) = ev.x[i] * gs(i, j) * ev.x[j];
                    gx[i] += 2.0 * gs(i, j) * ev.c(i, j) * ev.x[j];
                }
            }
            gc += dstar_newton1_backward(ev.c, ev.step, gx);
            return sym(gc);
        }
        case MetricKind::PHCM: no_log_euclidean(ev.metric);
    }
    return {};
}

PrototypeVector phi(MetricKind metric, const CorrelationMatrix& c, const SolverOptions& opts) {
    return phi_eval(metric, c, opts).value;
}

// ---- phi inverse -----------------------------------------------------------------

PhiInvEval phi_inv_eval(const PrototypeVector& p, const SolverOptions& opts) {
    PhiInvEval ev;
    ev.metric = p.metric;
    ev.proto = p.payload;
    const std::size_t n = p.payload.rows();
    switch (p.metric) {
        case MetricKind::ECM:
        case MetricKind::LECM: {
            DenseMatrix v = strict_lower(p.payload);
            ev.k = p.metric == MetricKind::ECM ? DenseMatrix::identity(n) + v : tri_exp(v);
            ev.s = sym(matmul_nt(ev.k, ev.k));
            ev.value = cor_trusted(ev.s);
            break;
        }
        case MetricKind::OLM: {
            DenseMatrix h = offmat(sym(p.payload));
            DplusResult d = dplus(h, opts.dplus_tol, opts.dplus_max_iter);
            DenseMatrix y = h;
            for (std::size_t i = 0; i < n; ++i) y(i, i) = d.d[i];
            ev.eig = sym_eig(y);
            ev.value = unit_diag(exp_of(ev.eig));
            break;
        }
        case MetricKind::LSM: {
            ev.eig = sym_eig(sym(p.payload));
            ev.s = exp_of(ev.eig);
            ev.value = cor_trusted(ev.s);
            break;
        }
        case MetricKind::PHCM: no_log_euclidean(p.metric);
    }
    return ev;
}

DenseMatrix phi_inv_vjp(const PhiInvEval& ev, const DenseMatrix& grad_c) {
    DenseMatrix g = sym(grad_c);
    switch (ev.metric) {
        case MetricKind::ECM:
        case MetricKind::LECM: {
            DenseMatrix gs = cor_backward(ev.s, g);
            DenseMatrix gk = strict_lower(2.0 * (gs * ev.k));
            if (ev.metric == MetricKind::ECM) return gk;
            return strict_lower(tri_exp_diff_adjoint(strict_lower(ev.proto), gk));
        }
        case MetricKind::OLM: {
            DenseMatrix gy = sym_fun_diff(SymFunction::exp(), ev.eig, offmat(g));
            return dplus_backward(ev.eig, gy);
        }
        case MetricKind::LSM: {
            DenseMatrix ge = cor_backward(ev.s, g);
            return sym_fun_diff(SymFunction::exp(), ev.eig, ge);
        }
        case MetricKind::PHCM: no_log_euclidean(ev.metric);
    }
    return {};
}

CorrelationMatrix phi_inv(const PrototypeVector& p, const SolverOptions& opts) { return phi_inv_eval(p, opts).value; }

// ---- coordinates ----------------------------------------------------------------

std::vector<double> prototype_coords(MetricKind metric, const DenseMatrix& p) {
    const std::size_t m = p.rows();
    std::vector<double> v;
    v.reserve(lower_count(m));
    switch (metric) {
        case MetricKind::ECM:
        case MetricKind::LECM:
        case MetricKind::OLM: {
            double s = metric == MetricKind::OLM ? std::sqrt(2.0) : 1.0;
            for (std::size_t i = 1; i < m; ++i)
                for (std::size_t j = 0; j < i; ++j) v.push_back(s * p(i, j));
            break;
        }
        case MetricKind::LSM: {
            for (std::size_t i = 0; i + 1 < m; ++i)
                for (std::size_t j = 0; j <= i; ++j) v.push_back((i == j ? std::sqrt(3.0) : std::sqrt(6.0)) * p(i, j));
            break;
        }
        case MetricKind::PHCM: no_log_euclidean(metric);
    }
    return v;
}

DenseMatrix prototype_coords_adjoint(MetricKind metric, std::size_t m, std::span<const double> g) {
    if (g.size() != lower_count(m)) throw Error(ErrorCode::ShapeMismatch, "prototype coordinate count");
    DenseMatrix out(m, m);
    std::size_t k = 0;
    switch (metric) {
        case MetricKind::ECM:
        case MetricKind::LECM:
        case MetricKind::OLM: {
            double s = metric == MetricKind::OLM ? std::sqrt(2.0) : 1.0;
            for (std::size_t i = 1; i < m; ++i)
                for (std::size_t j = 0; j < i; ++j) out(i, j) = s * g[k++];
            break;
        }
        case MetricKind::LSM: {
            for (std::size_t i = 0; i + 1 < m; ++i)
                for (std::size_t j = 0; j <= i; ++j) out(i, j) = (i == j ? std::sqrt(3.0) : std::sqrt(6.0)) * g[k++];
            break;
        }
        case MetricKind::PHCM: no_log_euclidean(metric);
    }
    return out;
}

DenseMatrix prototype_from_coords(MetricKind metric, std::size_t m, std::span<const double> v) {
    if (v.size() != lower_count(m)) throw Error(ErrorCode::ShapeMismatch, "prototype coordinate count");
    DenseMatrix p(m, m);
    std::size_t k = 0;
    switch (metric) {
        case MetricKind::ECM:
        case MetricKind::LECM:
            for (std::size_t i = 1; i < m; ++i)
                for (std::size_t j = 0; j < i; ++j) p(i, j) = v[k++];
            break;
        case MetricKind::OLM: {
            const double s = 1.0 / std::sqrt(2.0);
            for (std::size_t i = 1; i < m; ++i)
                for (std::size_t j = 0; j < i; ++j) p(i, j) = p(j, i) = s * v[k++];
            break;
        }
        case MetricKind::LSM: {
            const std::size_t last = m - 1;
            for (std::size_t i = 0; i < last; ++i)
                for (std::size_t j = 0; j <= i; ++j) {
                    double x = v[k++] / (i == j ? std::sqrt(3.0) : std::sqrt(6.0));
                    p(i, j) = p(j, i) = x;
                }
            double total = 0.0;
            for (std::size_t j = 0; j < last; ++j) {
                double col = 0.0;
                for (std::size_t i = 0; i < last; ++i) col += p(i, j);
                p(last, j) = p(j, last) = -col;
                total += col;
            }
            p(last, last) = total;
            break;
        }
        case MetricKind::PHCM: no_log_euclidean(metric);
    }
    return p;
}

std::vector<double> prototype_from_coords_adjoint(MetricKind metric, std::size_t m, const DenseMatrix& g) {
    std::vector<double> out;
    out.reserve(lower_count(m));
    switch (metric) {
        case MetricKind::ECM:
        case MetricKind::LECM:
            for (std::size_t i = 1; i < m; ++i)
                for (std::size_t j = 0; j < i; ++j) out.push_back(g(i, j));
            break;
        case MetricKind::OLM: {
            const double s = 1.0 / std::sqrt(2.0);
            for (std::size_t i = 1; i < m; ++i)
                for (std::size_t j = 0; j < i; ++j) out.push_back(s * (g(i, j) + g(j, i)));
            break;
        }
        case MetricKind::LSM: {
            // Each slot (i, j) writes x into (i,j),(j,i), -x into the last row/column at i and j,
            // and 2x (or x on the diagonal) into the corner.
            const std::size_t last = m - 1;
            auto last_pair = [&](std::size_t a) { return g(last, a) + g(a, last); };
            for (std::size_t i = 0; i < last; ++i)
                for (std::size_t j = 0; j <= i; ++j) {
                    double a;
                    if (i == j)
                        a = (g(i, i) - last_pair(i) + g(last, last)) / std::sqrt(3.0);
                    else
                        a = (g(i, j) + g(j, i) - last_pair(i) - last_pair(j) + 2.0 * g(last, last)) / std::sqrt(6.0);
                    out.push_back(a);
                }
            break;
        }
        case MetricKind::PHCM: no_log_euclidean(metric);
    }
    return out;
}

// ---- differentials -----------------------------------------------------------------

PrototypeVector pushforward(MetricKind metric, const CorrelationMatrix& c, const HollowSymmetric& v,
                            const SolverOptions& opts) {
    const DenseMatrix& vm = v.matrix();
    PhiEval ev = phi_eval(metric, c, opts);
    PrototypeVector out{metric, {}};
    switch (metric) {
        case MetricKind::ECM: out.payload = strict_lower(theta_diff(ev.chol_l, ev.theta_k, vm)); break;
        case MetricKind::LECM:
            out.payload = strict_lower(tri_log_diff(ev.theta_k, strict_lower(theta_diff(ev.chol_l, ev.theta_k, vm))));
            break;
        case MetricKind::OLM: out.payload = offmat(sym_fun_diff(SymFunction::log(), ev.eig, vm)); break;
        case MetricKind::LSM: {
            const std::size_t n = vm.rows();
            DenseMatrix dvd(n, n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) dvd(i, j) = ev.x[i] * vm(i, j) * ev.x[j];
            DenseMatrix ips = ev.sigma;
            for (std::size_t i = 0; i < n; ++i) ips(i, i) += 1.0;
            std::vector<double> rs = row_sums(dvd);
            DenseMatrix w = solve(ips, DenseMatrix::column(rs));
            // dvd + (V0 Sigma + Sigma V0)/2 with V0 = -2 diag(w)
            DenseMatrix arg = dvd;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) arg(i, j) -= (w[i] + w[j]) * ev.sigma(i, j);
            out.payload = sym(sym_fun_diff(SymFunction::log(), ev.eig, arg));
            break;
        }
        case MetricKind::PHCM: no_log_euclidean(metric);
    }
    return out;
}

HollowSymmetric pushforward_inv(const CorrelationMatrix& c, const PrototypeVector& w, const SolverOptions& opts) {
    const DenseMatrix& wm = w.payload;
    switch (w.metric) {
        case MetricKind::ECM: {
            DenseMatrix l = chol(c.matrix());
            return HollowSymmetric::project(theta_diff_inv(l, strict_lower(wm)));
        }
        case MetricKind::LECM: {
            PhiEval ev = phi_eval(MetricKind::LECM, c, opts);
            DenseMatrix xi = strict_lower(tri_exp_diff(ev.value.payload, strict_lower(wm)));
            return HollowSymmetric::project(theta_diff_inv(ev.chol_l, xi));
        }
        case MetricKind::OLM: {
            // D+(H) + H = log C, so the eigenvectors of C serve the differential.
            SymEig ce = sym_eig(c.matrix());
            SymEig se{ce.values, ce.vectors};
            for (auto& v : se.values) v = std::log(v);
            DenseMatrix hw = offmat(sym(wm));
            std::vector<double> dd = dplus_diff(se, hw);
            DenseMatrix arg = hw + diag_from_vec(dd);
            return HollowSymmetric::project(sym_fun_diff(SymFunction::exp(), se, arg));
        }
        case MetricKind::LSM: {
            PhiEval ev = phi_eval(MetricKind::LSM, c, opts);
            const std::size_t n = wm.rows();
            SymEig xe = ev.eig;
            for (auto& v : xe.values) v = std::log(v);
            DenseMatrix e = sym_fun_diff(SymFunction::exp(), xe, sym(wm));
            DenseMatrix out(n, n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double di = ev.x[i], dj = ev.x[j];
                    double corr = 0.5 * (e(i, i) * ev.sigma(i, j) / (di * di) + ev.sigma(i, j) * e(j, j) / (dj * dj));
                    out(i, j) = (e(i, j) - corr) / (di * dj);
                }
            return HollowSymmetric::project(out);
        }
        case MetricKind::PHCM: no_log_euclidean(w.metric);
    }
    return {};
}

// ---- Riemannian operators -------------------------------------------------------------

double riem_inner(MetricKind metric, const CorrelationMatrix& c, const HollowSymmetric& v, const HollowSymmetric& w) {
    return frobenius_inner(pushforward(metric, c, v).payload, pushforward(metric, c, w).payload);
}

CorrelationMatrix riem_exp(MetricKind metric, const CorrelationMatrix& c, const HollowSymmetric& v) {
    PrototypeVector p = phi(metric, c);
    p.payload += pushforward(metric, c, v).payload;
    return phi_inv(p);
}

HollowSymmetric riem_log(MetricKind metric, const CorrelationMatrix& c, const CorrelationMatrix& c2) {
    PrototypeVector d = phi(metric, c2);
    d.payload -= phi(metric, c).payload;
    return pushforward_inv(c, d);
}

CorrelationMatrix geodesic(MetricKind metric, const CorrelationMatrix& c, const CorrelationMatrix& c2, double t) {
    PrototypeVector a = phi(metric, c);
    PrototypeVector b = phi(metric, c2);
    a.payload = (1.0 - t) * a.payload + t * b.payload;
    return phi_inv(a);
}

double riem_dist(MetricKind metric, const CorrelationMatrix& c, const CorrelationMatrix& c2) {
    if (metric == MetricKind::PHCM) return phcm_dist(c, c2);
    return frobenius_norm(phi(metric, c).payload - phi(metric, c2).payload);
}

HollowSymmetric parallel_transport(MetricKind metric, const CorrelationMatrix& c, const CorrelationMatrix& c2,
                                   const HollowSymmetric& v) {
    return pushforward_inv(c2, pushforward(metric, c, v));
}

CorrelationMatrix frechet_mean(MetricKind metric, std::span<const CorrelationMatrix> cs) {
    if (cs.empty()) throw Error(ErrorCode::InvalidArgument, "frechet_mean of an empty set");
    const std::size_t n = cs.front().dim();
    PrototypeVector acc{metric, DenseMatrix(n, n)};
    for (const auto& c : cs) {
        if (c.dim() != n) throw Error(ErrorCode::DimensionMismatch, "frechet_mean: mixed dimensions");
        acc.payload += phi(metric, c).payload;
    }
    acc.payload *= 1.0 / static_cast<double>(cs.size());
    return phi_inv(acc);
}

double phcm_dist(const CorrelationMatrix& c, const CorrelationMatrix& c2) {
    if (c.dim() != c2.dim()) throw Error(ErrorCode::DimensionMismatch, "phcm_dist: dimensions differ");
    DenseMatrix l = chol(c.matrix());
    DenseMatrix l2 = chol(c2.matrix());
    double total = 0.0;
    for (std::size_t i = 1; i < l.rows(); ++i) {
        // -<psi(x), psi(y)>_L = 1 + |x - y|^2 / (2 x_last y_last) for unit x, y
        double sq = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
            double d = l(i, j) - l2(i, j);
            sq += d * d;
        }
        double t = 0.5 * sq / (l(i, i) * l2(i, i));
        double d = std::log1p(t + std::sqrt(t * (t + 2.0)));
        total += d * d;
    }
    return std::sqrt(total);
}

}  // namespace cornet
