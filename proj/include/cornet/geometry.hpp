#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cornet/dsolvers.hpp"

namespace cornet {

enum class MetricKind { ECM, LECM, OLM, LSM, PHCM };

inline constexpr MetricKind kAllMetrics[] = {MetricKind::ECM, MetricKind::LECM, MetricKind::OLM, MetricKind::LSM,
                                             MetricKind::PHCM};
inline constexpr MetricKind kLogEuclideanMetrics[] = {MetricKind::ECM, MetricKind::LECM, MetricKind::OLM,
                                                      MetricKind::LSM};

std::string_view metric_name(MetricKind m);
/// Case-insensitive.
std::optional<MetricKind> parse_metric(std::string_view s);
inline bool is_log_euclidean(MetricKind m) { return m != MetricKind::PHCM; }

/// Knobs for the two diagonal solvers.
struct SolverOptions {
    double dplus_tol = 1e-12;
    int dplus_max_iter = 100;
    DstarMode dstar_mode = DstarMode::Full;
    double dstar_tol = 1e-10;
    int dstar_max_iter = 50;
};

/// Image of a correlation matrix in the flat codomain of a Log-Euclidean metric.
/// ECM/LECM: strictly lower triangular; OLM: hollow symmetric; LSM: row-zero symmetric.
struct PrototypeVector {
    MetricKind metric = MetricKind::ECM;
    DenseMatrix payload;

    static PrototypeVector validated(MetricKind metric, DenseMatrix payload);
    std::size_t dim() const { return payload.rows(); }
};

// ---- the diffeomorphism phi and its inverse --------------------------------

/// Forward value plus what the adjoint needs.
struct PhiEval {
    MetricKind metric = MetricKind::ECM;
    PrototypeVector value;
    DenseMatrix c;
    DenseMatrix chol_l;     // ECM, LECM
    DenseMatrix theta_k;    // ECM, LECM
    SymEig eig;             // OLM: eig(C); LSM: eig(Sigma)
    DenseMatrix sigma;      // LSM
    std::vector<double> x;  // LSM
    DstarMode mode = DstarMode::Full;
    double step = 0.0;      // LSM one-step gradient
};

PhiEval phi_eval(MetricKind metric, const CorrelationMatrix& c, const SolverOptions& opts = {});
/// Symmetric gradient w.r.t. C given the gradient w.r.t. the prototype matrix.
DenseMatrix phi_vjp(const PhiEval& ev, const DenseMatrix& grad_proto);

struct PhiInvEval {
    MetricKind metric = MetricKind::ECM;
    CorrelationMatrix value;
    DenseMatrix proto;
    DenseMatrix k;      // ECM, LECM: factor before normalisation
    DenseMatrix s;      // ECM, LECM: k k^T; LSM: exp(R)
    SymEig eig;         // OLM: eig(D + H); LSM: eig(R)
};

PhiInvEval phi_inv_eval(const PrototypeVector& p, const SolverOptions& opts = {});
/// Gradient w.r.t. the prototype matrix (unprojected) given the gradient w.r.t. the output.
DenseMatrix phi_inv_vjp(const PhiInvEval& ev, const DenseMatrix& grad_c);

PrototypeVector phi(MetricKind metric, const CorrelationMatrix& c, const SolverOptions& opts = {});
CorrelationMatrix phi_inv(const PrototypeVector& p, const SolverOptions& opts = {});

// ---- coordinates of prototypes ----------------------------------------------

/// Dimension of the prototype space: m(m-1)/2 for every metric.
inline std::size_t prototype_dim(std::size_t m) { return lower_count(m); }
/// Coordinates in the FC basis: ECM/LECM x_ij; OLM sqrt(2) x_ij (i > j);
/// LSM sqrt(6) x_ij (m > i > j), sqrt(3) x_ii (i < m). Row-major slot order.
std::vector<double> prototype_coords(MetricKind metric, const DenseMatrix& p);
/// Inverse of prototype_coords.
DenseMatrix prototype_from_coords(MetricKind metric, std::size_t m, std::span<const double> v);
/// Adjoint of prototype_from_coords.
std::vector<double> prototype_from_coords_adjoint(MetricKind metric, std::size_t m, const DenseMatrix& g);
/// Adjoint of prototype_coords.
DenseMatrix prototype_coords_adjoint(MetricKind metric, std::size_t m, std::span<const double> g);

// ---- differentials -----------------------------------------------------------

PrototypeVector pushforward(MetricKind metric, const CorrelationMatrix& c, const HollowSymmetric& v,
                            const SolverOptions& opts = {});
HollowSymmetric pushforward_inv(const CorrelationMatrix& c, const PrototypeVector& w, const SolverOptions& opts = {});

// ---- Riemannian operators of the pullback metrics ----------------------------

double riem_inner(MetricKind metric, const CorrelationMatrix& c, const HollowSymmetric& v, const HollowSymmetric& w);
CorrelationMatrix riem_exp(MetricKind metric, const CorrelationMatrix& c, const HollowSymmetric& v);
HollowSymmetric riem_log(MetricKind metric, const CorrelationMatrix& c, const CorrelationMatrix& c2);
CorrelationMatrix geodesic(MetricKind metric, const CorrelationMatrix& c, const CorrelationMatrix& c2, double t);
double riem_dist(MetricKind metric, const CorrelationMatrix& c, const CorrelationMatrix& c2);
HollowSymmetric parallel_transport(MetricKind metric, const CorrelationMatrix& c, const CorrelationMatrix& c2,
                                   const HollowSymmetric& v);
CorrelationMatrix frechet_mean(MetricKind metric, std::span<const CorrelationMatrix> cs);

/// Product-of-hyperbolic distance of the hemisphere rows of the Cholesky factors.
double phcm_dist(const CorrelationMatrix& c, const CorrelationMatrix& c2);

}  // namespace cornet
