#pragma once

#include <span>
#include <vector>

#include "cornet/correlation.hpp"

namespace cornet {

using Vec = std::vector<double>;

/// Points are kept at radius <= 1 - kBallGuard; anything produced further out is rescaled.
constexpr double kBallGuard = 1e-14;

/// Number of outputs that were pulled back inside the ball guard since program start.
std::size_t ball_guard_events();

/// Point of the open unit ball (Poincare model, curvature -1).
class PoincarePoint {
public:
    PoincarePoint() = default;
    static PoincarePoint validated(Vec x);
    std::size_t dim() const { return x_.size(); }
    const Vec& coords() const { return x_; }

private:
    explicit PoincarePoint(Vec x) : x_(std::move(x)) {}
    Vec x_;
};

/// Unit vector of R^{n+1} with positive last coordinate.
class HemispherePoint {
public:
    HemispherePoint() = default;
    static HemispherePoint validated(Vec x);
    std::size_t dim() const { return x_.empty() ? 0 : x_.size() - 1; }
    const Vec& coords() const { return x_; }

private:
    explicit HemispherePoint(Vec x) : x_(std::move(x)) {}
    Vec x_;
};

// ---- model maps ----------------------------------------------------------------

/// (x, x_last) -> x / (1 + x_last)
Vec hs_to_pb(std::span<const double> h);
/// y -> (2y, 1 - |y|^2) / (1 + |y|^2)
Vec pb_to_hs(std::span<const double> y);
PoincarePoint hs_to_pb(const HemispherePoint& h);
HemispherePoint pb_to_hs(const PoincarePoint& y);
Vec hs_to_pb_vjp(std::span<const double> h, std::span<const double> grad);
Vec pb_to_hs_vjp(std::span<const double> y, std::span<const double> grad);

/// atanh(|y|) y / |y|
Vec pb_log0(std::span<const double> y);
/// tanh(|v|) v / |v|, rescaled onto the guard radius if needed.
Vec pb_exp0(std::span<const double> v);
Vec pb_log0_vjp(std::span<const double> y, std::span<const double> grad);
Vec pb_exp0_vjp(std::span<const double> v, std::span<const double> grad);

double poincare_dist(std::span<const double> a, std::span<const double> b);
/// Hyperbolic distance of two hemisphere points through the hyperboloid map.
double hemisphere_dist(std::span<const double> a, std::span<const double> b);

// ---- beta concatenation ------------------------------------------------------------

/// Log-gamma via the Lanczos approximation (g = 7, 9 terms).
double lgamma_lanczos(double x);
/// log B(a/2, 1/2)
double log_beta_coef(double a);
/// beta_a / beta_b
double beta_ratio(double a, double b);

Vec beta_concat(std::span<const Vec> parts);
/// Inverse of beta_concat for the given part dimensions. Throws DimensionMismatch.
std::vector<Vec> beta_split(std::span<const double> x, std::span<const std::size_t> dims);

// ---- correlation <-> poly-Poincare -----------------------------------------------------

/// Parts 1..n-1; part i lies in B^i and comes from row i of chol(C).
struct PolyPoincare {
    std::vector<Vec> parts;
    std::size_t matrix_dim() const { return parts.size() + 1; }
};

PolyPoincare cor_to_ppb(const CorrelationMatrix& c);
CorrelationMatrix ppb_to_cor(const PolyPoincare& p);

// ---- Poincare layers ------------------------------------------------------------

/// 2|z| asinh(lambda <x, z/|z|> cosh 2g - (lambda - 1) sinh 2g), lambda = 2 / (1 - |x|^2); 0 when z = 0.
double pb_mlr_logit(std::span<const double> x, std::span<const double> z, double gamma);
/// Same, with |x|^2 given.
double pb_mlr_logit(std::span<const double> x, double xx, std::span<const double> z, double gamma);

struct MlrLogitGrad {
    double value = 0.0;
    Vec dx;
    Vec dz;
    double dgamma = 0.0;
};
MlrLogitGrad pb_mlr_logit_grad(std::span<const double> x, std::span<const double> z, double gamma);

/// Poincare FC: y = w / (1 + sqrt(1 + |w|^2)), w_k = sinh(v_k(x)); z has one row per output.
Vec pb_fc(std::span<const double> x, const DenseMatrix& z, std::span<const double> gamma);
/// Output of pb_fc given the pre-activation logits v.
Vec pb_fc_from_logits(std::span<const double> v);
/// Gradient w.r.t. the logits of pb_fc_from_logits.
Vec pb_fc_from_logits_vjp(std::span<const double> v, std::span<const double> grad_y);

}  // namespace cornet
