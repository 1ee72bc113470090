#include "cornet/hyperbolic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace cornet {

namespace {

std::atomic<std::size_t> g_guard_events{0};

constexpr double kGuardRadius = 1.0 - kBallGuard;
constexpr double kSinhClamp = 700.0;

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) {
    double scale = 0.0;
    for (double v : a) scale = std::max(scale, std::abs(v));
    if (scale == 0.0 || !std::isfinite(scale)) return scale;
    double s = 0.0;
    for (double v : a) s += (v / scale) * (v / scale);
    return scale * std::sqrt(s);
}

// acosh(1 + t) without cancellation for small t
double acosh1p(double t) { return std::log1p(t + std::sqrt(t * (t + 2.0))); }

// f(r) = atanh(r) / r and f'(r) / r
void log0_coefs(double r, double& f, double& fp_over_r) {
    if (r < 1e-4) {
        double r2 = r * r;
        f = 1.0 + r2 / 3.0 + r2 * r2 / 5.0;
        fp_over_r = 2.0 / 3.0 + 4.0 * r2 / 5.0;
        return;
    }
    f = std::atanh(r) / r;
    fp_over_r = (1.0 / (1.0 - r * r) - f) / (r * r);
}

// f(r) = tanh(r) / r and f'(r) / r
void exp0_coefs(double r, double& f, double& fp_over_r) {
    if (r < 1e-4) {
        double r2 = r * r;
        f = 1.0 - r2 / 3.0 + 2.0 * r2 * r2 / 15.0;
        fp_over_r = -2.0 / 3.0 + 8.0 * r2 / 15.0;
        return;
    }
    double t = std::tanh(r);
    f = t / r;
    fp_over_r = ((1.0 - t * t) - f) / (r * r);
}

bool exp0_guarded(double r) { return std::tanh(r) > kGuardRadius; }

void guard(Vec& y) {
    double r = norm(y);
    if (r > kGuardRadius) {
        double s = kGuardRadius / r;
        for (auto& v : y) v *= s;
        g_guard_events.fetch_add(1, std::memory_order_relaxed);
    }
}

}  // namespace

std::size_t ball_guard_events() { return g_guard_events.load(std::memory_order_relaxed); }

PoincarePoint PoincarePoint::validated(Vec x) {
    for (double v : x)
        if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite Poincare coordinate");
    if (norm(x) >= 1.0) throw Error(ErrorCode::InvalidArgument, "point outside the open unit ball");
    return PoincarePoint(std::move(x));
}

HemispherePoint HemispherePoint::validated(Vec x) {
    if (x.empty()) throw Error(ErrorCode::InvalidDimension, "empty hemisphere point");
    for (double v : x)
        if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite hemisphere coordinate");
    if (std::abs(norm(x) - 1.0) > 1e-10) throw Error(ErrorCode::InvalidArgument, "hemisphere point not unit norm");
    if (!(x.back() > 0.0)) throw Error(ErrorCode::InvalidArgument, "hemisphere point has non-positive last coordinate");
    return HemispherePoint(std::move(x));
}

// ---- model maps ----------------------------------------------------------------

Vec hs_to_pb(std::span<const double> h) {
    if (h.empty()) throw Error(ErrorCode::InvalidDimension, "empty hemisphere point");
    const std::size_t n = h.size() - 1;
    const double d = 1.0 + h[n];
    Vec y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = h[i] / d;
    guard(y);
    return y;
}

Vec pb_to_hs(std::span<const double> y) {
    const double s = dot(y, y);
    Vec h(y.size() + 1);
    for (std::size_t i = 0; i < y.size(); ++i) h[i] = 2.0 * y[i] / (1.0 + s);
    h.back() = (1.0 - s) / (1.0 + s);
    return h;
}

PoincarePoint hs_to_pb(const HemispherePoint& h) { return PoincarePoint::validated(hs_to_pb(h.coords())); }

HemispherePoint pb_to_hs(const PoincarePoint& y) { return HemispherePoint::validated(pb_to_hs(y.coords())); }

Vec hs_to_pb_vjp(std::span<const double> h, std::span<const double> grad) {
    const std::size_t n = h.size() - 1;
    const double d = 1.0 + h[n];
    Vec g(n + 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        g[i] = grad[i] / d;
        acc += grad[i] * h[i];
    }
    g[n] = -acc / (d * d);
    return g;
}

Vec pb_to_hs_vjp(std::span<const double> y, std::span<const double> grad) {
    const std::size_t n = y.size();
    const double s = dot(y, y);
    const double d = 1.0 + s;
    const double gy_dot_y = dot(grad.first(n), y);
    const double coef = -4.0 * (gy_dot_y + grad[n]) / (d * d);
    Vec g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = 2.0 * grad[i] / d + coef * y[i];
    return g;
}

Vec pb_log0(std::span<const double> y) {
    const double r = norm(y);
    if (r >= 1.0) throw Error(ErrorCode::InvalidArgument, "log0 of a point outside the ball");
    double f, fp;
    log0_coefs(r, f, fp);
    Vec v(y.begin(), y.end());
    for (auto& x : v) x *= f;
    return v;
}

Vec pb_exp0(std::span<const double> v) {
    const double r = norm(v);
    Vec y(v.begin(), v.end());
    if (exp0_guarded(r)) {
        for (auto& x : y) x *= kGuardRadius / r;
        g_guard_events.fetch_add(1, std::memory_order_relaxed);
        return y;
    }
    double f, fp;
    exp0_coefs(r, f, fp);
    for (auto& x : y) x *= f;
    return y;
}

Vec pb_log0_vjp(std::span<const double> y, std::span<const double> grad) {
    double f, fp;
    log0_coefs(norm(y), f, fp);
    const double gy = dot(grad, y);
    Vec g(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) g[i] = f * grad[i] + fp * gy * y[i];
    return g;
}

Vec pb_exp0_vjp(std::span<const double> v, std::span<const double> grad) {
    const double r = norm(v);
    double f, fp;
    if (exp0_guarded(r)) {
        f = kGuardRadius / r;
        fp = -kGuardRadius / (r * r * r);
    } else {
        exp0_coefs(r, f, fp);
    }
    const double gv = dot(grad, v);
    Vec g(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) g[i] = f * grad[i] + fp * gv * v[i];
    return g;
}

double poincare_dist(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "poincare_dist dimension mismatch");
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    const double t = 2.0 * d2 / ((1.0 - dot(a, a)) * (1.0 - dot(b, b)));
    return acosh1p(t);
}

double hemisphere_dist(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty())
        throw Error(ErrorCode::DimensionMismatch, "hemisphere_dist dimension mismatch");
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    return acosh1p(0.5 * d2 / (a.back() * b.back()));
}

// ---- beta concatenation ------------------------------------------------------------

double lgamma_lanczos(double x) {
    static constexpr double kCoef[9] = {0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
                                        771.32342877765313,      -176.61502916214059,   12.507343278686905,
                                        -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
    if (!(x > 0.0)) throw Error(ErrorCode::InvalidArgument, "lgamma_lanczos needs a positive argument");
    if (x < 0.5) return std::log(M_PI / std::sin(M_PI * x)) - lgamma_lanczos(1.0 - x);
    x -= 1.0;
    double a = kCoef[0];
    const double t = x + 7.5;
    for (int i = 1; i < 9; ++i) a += kCoef[i] / (x + i);
    return 0.5 * std::log(2.0 * M_PI) + (x + 0.5) * std::log(t) - t + std::log(a);
}

double log_beta_coef(double a) {
    return lgamma_lanczos(a / 2.0) + lgamma_lanczos(0.5) - lgamma_lanczos(a / 2.0 + 0.5);
}

double beta_ratio(double a, double b) {
    if (a == b) return 1.0;
    return std::exp(log_beta_coef(a) - log_beta_coef(b));
}

Vec beta_concat(std::span<const Vec> parts) {
    if (parts.empty()) throw Error(ErrorCode::InvalidDimension, "beta_concat of nothing");
    if (parts.size() == 1) return parts[0];
    std::size_t n = 0;
    for (const auto& p : parts) n += p.size();
    Vec v;
    v.reserve(n);
    for (const auto& p : parts) {
        Vec l = pb_log0(p);
        const double s = beta_ratio(double(n), double(p.size()));
        for (double x : l) v.push_back(s * x);
    }
    return pb_exp0(v);
}

std::vector<Vec> beta_split(std::span<const double> x, std::span<const std::size_t> dims) {
    std::size_t n = 0;
    for (std::size_t d : dims) n += d;
    if (n != x.size()) throw Error(ErrorCode::DimensionMismatch, "beta_split dimensions do not sum to the input size");
    if (dims.size() == 1) return {Vec(x.begin(), x.end())};
    Vec v = pb_log0(x);
    std::vector<Vec> out;
    std::size_t off = 0;
    for (std::size_t d : dims) {
        const double s = beta_ratio(double(d), double(n));
        Vec part(d);
        for (std::size_t i = 0; i < d; ++i) part[i] = s * v[off + i];
        out.push_back(pb_exp0(part));
        off += d;
    }
    return out;
}

// ---- correlation <-> poly-Poincare -----------------------------------------------------

PolyPoincare cor_to_ppb(const CorrelationMatrix& c) {
    const std::size_t n = c.dim();
    DenseMatrix l = chol(c.matrix());
    PolyPoincare p;
    p.parts.reserve(n - 1);
    for (std::size_t i = 1; i < n; ++i) {
        Vec h(l.row_ptr(i), l.row_ptr(i) + i + 1);
        // rows of the Cholesky factor of a correlation matrix are unit vectors
        double s = norm(h);
        for (auto& v : h) v /= s;
        p.parts.push_back(hs_to_pb(h));
    }
    return p;
}

CorrelationMatrix ppb_to_cor(const PolyPoincare& p) {
    const std::size_t n = p.matrix_dim();
    DenseMatrix l(n, n);
    l(0, 0) = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const Vec& y = p.parts[i - 1];
        if (y.size() != i) throw Error(ErrorCode::DimensionMismatch, "poly-Poincare part has the wrong dimension");
        Vec h = pb_to_hs(y);
        for (std::size_t j = 0; j <= i; ++j) l(i, j) = h[j];
    }
    DenseMatrix c = matmul_nt(l, l);
    c = sym(c);
    for (std::size_t i = 0; i < n; ++i) c(i, i) = 1.0;
    return CorrelationMatrix::trusted(std::move(c));
}

// ---- Poincare layers ------------------------------------------------------------

double pb_mlr_logit(std::span<const double> x, std::span<const double> z, double gamma) {
    return pb_mlr_logit(x, dot(x, x), z, gamma);
}

double pb_mlr_logit(std::span<const double> x, double xx, std::span<const double> z, double gamma) {
    if (x.size() != z.size()) throw Error(ErrorCode::DimensionMismatch, "MLR weight and point dimensions differ");
    const auto [xz, zz] = dot_and_sq(x.data(), z.data(), x.size());
    const double zn = std::sqrt(zz);
    if (zn == 0.0) return 0.0;
    const double lambda = 2.0 / (1.0 - xx);
    const double xu = xz / zn;
    const double a = lambda * xu * std::cosh(2.0 * gamma) - (lambda - 1.0) * std::sinh(2.0 * gamma);
    return 2.0 * zn * std::asinh(a);
}

MlrLogitGrad pb_mlr_logit_grad(std::span<const double> x, std::span<const double> z, double gamma) {
    if (x.size() != z.size()) throw Error(ErrorCode::DimensionMismatch, "MLR weight and point dimensions differ");
    const std::size_t n = x.size();
    MlrLogitGrad g;
    g.dx.assign(n, 0.0);
    g.dz.assign(n, 0.0);
    const double zn = norm(z);
    if (zn == 0.0) return g;
    const double lambda = 2.0 / (1.0 - dot(x, x));
    const double xu = dot(x, z) / zn;
    const double ch = std::cosh(2.0 * gamma), sh = std::sinh(2.0 * gamma);
    const double a = lambda * xu * ch - (lambda - 1.0) * sh;
    const double as = std::asinh(a);
    g.value = 2.0 * zn * as;
    const double dlda = 2.0 * zn / std::sqrt(1.0 + a * a);
    const double dadl = xu * ch - sh;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = z[i] / zn;
        g.dx[i] = dlda * (dadl * lambda * lambda * x[i] + lambda * ch * u);
        g.dz[i] = 2.0 * u * as + dlda * lambda * ch * (x[i] - xu * u) / zn;
    }
    g.dgamma = dlda * (2.0 * lambda * xu * sh - 2.0 * (lambda - 1.0) * ch);
    return g;
}

Vec pb_fc(std::span<const double> x, const DenseMatrix& z, std::span<const double> gamma) {
    if (z.cols() != x.size() || gamma.size() != z.rows())
        throw Error(ErrorCode::DimensionMismatch, "Poincare FC parameter shapes do not match the input");
    Vec v(z.rows());
    for (std::size_t k = 0; k < z.rows(); ++k)
        v[k] = pb_mlr_logit(x, std::span<const double>(z.row_ptr(k), z.cols()), gamma[k]);
    return pb_fc_from_logits(v);
}

Vec pb_fc_from_logits(std::span<const double> v) {
    Vec w(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) w[k] = std::sinh(std::clamp(v[k], -kSinhClamp, kSinhClamp));
    const double nw = norm(w);
    const double q = nw > 1e150 ? nw : std::sqrt(1.0 + nw * nw);
    for (auto& x : w) x /= 1.0 + q;
    guard(w);
    return w;
}

Vec pb_fc_from_logits_vjp(std::span<const double> v, std::span<const double> grad_y) {
    Vec w(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) w[k] = std::sinh(std::clamp(v[k], -kSinhClamp, kSinhClamp));
    const double nw = norm(w);
    const double q = nw > 1e150 ? nw : std::sqrt(1.0 + nw * nw);
    Vec y(w);
    for (auto& x : y) x /= 1.0 + q;
    const double gy = dot(grad_y, y);
    Vec g(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double gw = grad_y[k] / (1.0 + q) - gy * y[k] / q;
        g[k] = std::abs(v[k]) > kSinhClamp ? 0.0 : gw * std::cosh(v[k]);
    }
    return g;
}

}  // namespace cornet
