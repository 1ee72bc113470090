#pragma once

#include <span>
#include <vector>

#include "cornet/correlation.hpp"

namespace cornet {

/// Diagonal D with diag(exp(D + H)) = 1 for hollow symmetric H.
struct DplusResult {
    std::vector<double> d;
    int iterations = 0;
    double residual = 0.0;
    std::vector<double> residual_history;
};

/// Fixed point D <- D - log(diag(exp(D + H))) from D = 0; switches to damped Newton steps on
/// log diag(exp(D + H)) while the fixed point contracts slower than 1/2 per iteration.
/// Throws NoConvergence when max_iter is reached above tol.
DplusResult dplus(const DenseMatrix& h, double tol = 1e-12, int max_iter = 100);

/// Gradient w.r.t. H of l(D+(H) + H) given grad_y = dl/dY (symmetric), for Y = D+(H) + H.
/// Throws SingularH0 when cond(H0) > 1e12.
DenseMatrix dplus_backward(const DenseMatrix& h, std::span<const double> d, const DenseMatrix& grad_y);
/// Same, with the eigendecomposition of Y already available.
DenseMatrix dplus_backward(const SymEig& y_eig, const DenseMatrix& grad_y);
/// Differential of D+ at H in direction W: -diag(H0^{-1} diag(exp_*,Y(W))).
std::vector<double> dplus_diff(const SymEig& y_eig, const DenseMatrix& w);

enum class DstarMode { Full, Newton1 };

/// Positive x with diag(x) C diag(x) having unit row sums.
struct DstarResult {
    std::vector<double> x;
    int iterations = 0;
    double residual = 0.0;
    /// Step length of the last accepted Newton step (used by the one-step gradient).
    double last_step = 0.0;
};

/// Damped Newton on f(x) = C x - 1/x, J = C + diag(1/x^2), halving down to 2^-20.
/// Full: iterate to ||f||_inf <= tol. Newton1: exactly one damped step from x0.
DstarResult dstar(const DenseMatrix& c, DstarMode mode = DstarMode::Full, double tol = 1e-10, int max_iter = 50,
                  std::span<const double> x0 = {});

/// Exact gradient w.r.t. C of l(D* C D*) given grad_sigma and sigma = D* C D*.
DenseMatrix dstar_backward(const DenseMatrix& sigma, const DenseMatrix& grad_sigma);
/// Gradient w.r.t. C through the single Newton step x1 = 1 - a (C + I)^{-1} (C 1 - 1).
DenseMatrix dstar_newton1_backward(const DenseMatrix& c, double step, std::span<const double> grad_x);

}  // namespace cornet
