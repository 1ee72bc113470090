#include "doctest.h"
#include "helpers.hpp"

#include <algorithm>
#include <numeric>

#include "cornet/geometry.hpp"

using namespace cornet;
using testutil::central_diff;
using testutil::rel_err;

namespace {

SolverOptions tight() {
    SolverOptions o;
    o.dplus_tol = 1e-14;
    o.dplus_max_iter = 300;
    o.dstar_tol = 1e-14;
    o.dstar_max_iter = 100;
    return o;
}

DenseMatrix phi_mat(MetricKind m, const DenseMatrix& c, const SolverOptions& o) {
    return phi(m, CorrelationMatrix::trusted(c), o).payload;
}

DenseMatrix permute(const DenseMatrix& a, const std::vector<std::size_t>& p) {
    DenseMatrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(p[i], p[j]);
    return out;
}

}  // namespace

TEST_CASE("metric names round trip") {
    for (MetricKind m : kAllMetrics) CHECK(parse_metric(metric_name(m)) == m);
    CHECK(!parse_metric("XYZ").has_value());
}

TEST_CASE("phi of the identity is zero and phi_inv of zero is the identity") {
    for (MetricKind m : kLogEuclideanMetrics) {
        CHECK(max_abs(phi(m, CorrelationMatrix::identity(5)).payload) < 1e-15);
        PrototypeVector z = PrototypeVector::validated(m, DenseMatrix(5, 5));
        CHECK(max_abs_diff(phi_inv(z).matrix(), DenseMatrix::identity(5)) < 1e-15);
    }
}

TEST_CASE("OLM 2x2 closed form") {
    DenseMatrix h = DenseMatrix::from_rows({{0, 1}, {1, 0}});
    CorrelationMatrix c = phi_inv(PrototypeVector::validated(MetricKind::OLM, h));
    CHECK(c(0, 1) == doctest::Approx(std::tanh(1.0)).epsilon(1e-12));
    CHECK(c(0, 0) == 1.0);
}

TEST_CASE("ECM and LECM closed forms for n = 2") {
    CorrelationMatrix c = CorrelationMatrix::validated(DenseMatrix::from_rows({{1, 0.6}, {0.6, 1}}));
    CHECK(phi(MetricKind::ECM, c).payload(1, 0) == doctest::Approx(0.75));
    CHECK(phi(MetricKind::LECM, c).payload(1, 0) == doctest::Approx(0.75));
    // LSM: x = 1/sqrt(1.6); Sigma has eigenvalues 1 and 0.4/1.6
    PrototypeVector r = phi(MetricKind::LSM, c);
    double expected = 0.5 * std::log(0.25);
    CHECK(r.payload(0, 0) == doctest::Approx(expected));
    CHECK(r.payload(0, 1) == doctest::Approx(-expected));
}

TEST_CASE("phi round trips") {
    std::mt19937_64 rng(1);
    for (MetricKind m : kLogEuclideanMetrics) {
        for (std::size_t n : {3u, 8u}) {
            CorrelationMatrix c = random_correlation(n, 0.4, rng);
            PrototypeVector p = phi(m, c);
            CHECK(max_abs_diff(phi_inv(p).matrix(), c.matrix()) < 1e-10);
            CHECK(max_abs_diff(phi(m, phi_inv(p)).payload, p.payload) < 1e-10);
        }
    }
}

TEST_CASE("pushforward at the identity") {
    std::mt19937_64 rng(2);
    DenseMatrix v = testutil::random_hollow(rng, 5);
    HollowSymmetric hv = HollowSymmetric::validated(v);
    CorrelationMatrix id = CorrelationMatrix::identity(5);
    CHECK(max_abs_diff(pushforward(MetricKind::ECM, id, hv).payload, strict_lower(v)) < 1e-14);
    CHECK(max_abs_diff(pushforward(MetricKind::LECM, id, hv).payload, strict_lower(v)) < 1e-14);
    CHECK(max_abs_diff(pushforward(MetricKind::OLM, id, hv).payload, v) < 1e-14);
    CHECK(max_abs_diff(pushforward(MetricKind::LSM, id, hv).payload, v - diag_from_vec(row_sums(v))) < 1e-14);
}

TEST_CASE("pushforward equals the differential of phi and pushforward_inv inverts it") {
    std::mt19937_64 rng(3);
    for (MetricKind m : kLogEuclideanMetrics) {
        CorrelationMatrix c = random_correlation(5, 0.4, rng);
        DenseMatrix v = testutil::random_hollow(rng, 5);
        DenseMatrix an = pushforward(m, c, HollowSymmetric::validated(v)).payload;
        SolverOptions o = tight();
        DenseMatrix fd = central_diff([&](const DenseMatrix& x) { return phi_mat(m, x, o); }, c.matrix(), v, 1e-5);
        CHECK(rel_err(an, fd) < 1e-7);
        HollowSymmetric back = pushforward_inv(c, PrototypeVector::validated(m, an));
        CHECK(max_abs_diff(back.matrix(), v) < 1e-10);
    }
}

TEST_CASE("pushforward_inv equals the differential of phi_inv") {
    std::mt19937_64 rng(4);
    for (MetricKind m : kLogEuclideanMetrics) {
        CorrelationMatrix c = random_correlation(5, 0.4, rng);
        PrototypeVector p = phi(m, c);
        DenseMatrix w = pushforward(m, c, HollowSymmetric::validated(testutil::random_hollow(rng, 5))).payload;
        SolverOptions o = tight();
        DenseMatrix fd = central_diff(
            [&](const DenseMatrix& x) { return phi_inv(PrototypeVector{m, x}, o).matrix(); }, p.payload, w, 1e-5);
        DenseMatrix an = pushforward_inv(c, PrototypeVector::validated(m, w)).matrix();
        CHECK(rel_err(an, fd) < 1e-7);
    }
}

TEST_CASE("riemannian operators") {
    std::mt19937_64 rng(5);
    for (MetricKind m : kLogEuclideanMetrics) {
        CorrelationMatrix a = random_correlation(6, 0.4, rng);
        CorrelationMatrix b = random_correlation(6, 0.4, rng);
        CHECK(riem_dist(m, a, a) == 0.0);
        CHECK(riem_dist(m, a, b) == doctest::Approx(riem_dist(m, b, a)));
        HollowSymmetric v = riem_log(m, a, b);
        CHECK(max_abs_diff(riem_exp(m, a, v).matrix(), b.matrix()) < 1e-9);
        CHECK(std::sqrt(riem_inner(m, a, v, v)) == doctest::Approx(riem_dist(m, a, b)).epsilon(1e-9));
        CHECK(max_abs_diff(geodesic(m, a, b, 0.0).matrix(), a.matrix()) < 1e-10);
        CHECK(max_abs_diff(geodesic(m, a, b, 1.0).matrix(), b.matrix()) < 1e-10);
        CorrelationMatrix mid = geodesic(m, a, b, 0.3);
        CHECK(riem_dist(m, a, mid) == doctest::Approx(0.3 * riem_dist(m, a, b)).epsilon(1e-9));

        std::vector<CorrelationMatrix> pair{a, b};
        CHECK(max_abs_diff(frechet_mean(m, pair).matrix(), geodesic(m, a, b, 0.5).matrix()) < 1e-10);
        std::vector<CorrelationMatrix> one{a};
        CHECK(max_abs_diff(frechet_mean(m, one).matrix(), a.matrix()) < 1e-10);

        HollowSymmetric w = HollowSymmetric::validated(testutil::random_hollow(rng, 6));
        HollowSymmetric pv = parallel_transport(m, a, b, v);
        HollowSymmetric pw = parallel_transport(m, a, b, w);
        CHECK(riem_inner(m, b, pv, pw) == doctest::Approx(riem_inner(m, a, v, w)).epsilon(1e-9));
        // riem_log at a of the transported end point of a geodesic
        HollowSymmetric back = parallel_transport(m, b, a, pv);
        CHECK(max_abs_diff(back.matrix(), v.matrix()) < 1e-9);
    }
}

TEST_CASE("riem_inner at the identity under OLM is Frobenius") {
    std::mt19937_64 rng(6);
    HollowSymmetric v = HollowSymmetric::validated(testutil::random_hollow(rng, 4));
    HollowSymmetric w = HollowSymmetric::validated(testutil::random_hollow(rng, 4));
    CHECK(riem_inner(MetricKind::OLM, CorrelationMatrix::identity(4), v, w) ==
          doctest::Approx(frobenius_inner(v.matrix(), w.matrix())));
}

TEST_CASE("PHCM has no Log-Euclidean operators") {
    CHECK_THROWS_AS(phi(MetricKind::PHCM, CorrelationMatrix::identity(3)), Error);
}

TEST_CASE("phcm_dist example and metric axioms") {
    CorrelationMatrix c = CorrelationMatrix::validated(DenseMatrix::from_rows({{1, 0.6}, {0.6, 1}}));
    CHECK(phcm_dist(c, CorrelationMatrix::identity(2)) == doctest::Approx(std::acosh(1.25)).epsilon(1e-12));
    CHECK(std::abs(phcm_dist(c, CorrelationMatrix::identity(2)) - 0.693147) < 1e-6);
    std::mt19937_64 rng(7);
    for (int t = 0; t < 10; ++t) {
        CorrelationMatrix a = random_correlation(5, 0.5, rng);
        CorrelationMatrix b = random_correlation(5, 0.5, rng);
        CorrelationMatrix d = random_correlation(5, 0.5, rng);
        CHECK(phcm_dist(a, a) == 0.0);
        CHECK(phcm_dist(a, b) == doctest::Approx(phcm_dist(b, a)).epsilon(1e-14));
        CHECK(phcm_dist(a, d) <= phcm_dist(a, b) + phcm_dist(b, d) + 1e-12);
    }
}

TEST_CASE("OLM and LSM are permutation equivariant") {
    std::mt19937_64 rng(8);
    for (std::size_t n : {4u, 6u}) {
        CorrelationMatrix c = random_correlation(n, 0.5, rng);
        std::vector<std::size_t> p(n);
        std::iota(p.begin(), p.end(), 0);
        std::shuffle(p.begin(), p.end(), rng);
        CorrelationMatrix pc = CorrelationMatrix::trusted(permute(c.matrix(), p));
        for (MetricKind m : {MetricKind::OLM, MetricKind::LSM})
            CHECK(max_abs_diff(phi(m, pc).payload, permute(phi(m, c).payload, p)) < 1e-8);
    }
}

TEST_CASE("phi_vjp matches finite differences") {
    std::mt19937_64 rng(9);
    for (MetricKind m : kLogEuclideanMetrics) {
        for (DstarMode mode : {DstarMode::Full, DstarMode::Newton1}) {
            if (mode == DstarMode::Newton1 && m != MetricKind::LSM) continue;
            SolverOptions o = tight();
            o.dstar_mode = mode;
            CorrelationMatrix c = random_correlation(5, 0.4, rng);
            PhiEval ev = phi_eval(m, c, o);
            DenseMatrix g = ev.value.payload;  // any direction in the codomain
            for (auto& v : g.data()) v = std::sin(7.0 * v + 1.0);
            if (m == MetricKind::ECM || m == MetricKind::LECM) g = strict_lower(g);
            DenseMatrix an = phi_vjp(ev, g);
            DenseMatrix dir = testutil::random_hollow(rng, 5);
            double fd = testutil::central_diff_scalar(
                [&](const DenseMatrix& x) { return frobenius_inner(g, phi_mat(m, x, o)); }, c.matrix(), dir, 1e-5);
            CHECK(rel_err(frobenius_inner(an, dir), fd) < 1e-7);
        }
    }
}

TEST_CASE("phi_inv_vjp matches finite differences") {
    std::mt19937_64 rng(10);
    for (MetricKind m : kLogEuclideanMetrics) {
        SolverOptions o = tight();
        CorrelationMatrix c = random_correlation(5, 0.4, rng);
        PrototypeVector p = phi(m, c, o);
        PhiInvEval ev = phi_inv_eval(p, o);
        DenseMatrix g = testutil::random_sym(rng, 5);
        DenseMatrix an = phi_inv_vjp(ev, g);
        DenseMatrix dir = pushforward(m, c, HollowSymmetric::validated(testutil::random_hollow(rng, 5))).payload;
        double fd = testutil::central_diff_scalar(
            [&](const DenseMatrix& x) { return frobenius_inner(g, phi_inv(PrototypeVector{m, x}, o).matrix()); },
            p.payload, dir, 1e-5);
        CHECK(rel_err(frobenius_inner(an, dir), fd) < 1e-7);
    }
}

TEST_CASE("prototype coordinates round trip and adjoints") {
    std::mt19937_64 rng(11);
    for (MetricKind m : kLogEuclideanMetrics) {
        std::size_t n = 4;
        std::vector<double> v(prototype_dim(n));
        std::normal_distribution<double> nd;
        for (auto& x : v) x = nd(rng);
        DenseMatrix p = prototype_from_coords(m, n, v);
        PrototypeVector::validated(m, p);
        std::vector<double> back = prototype_coords(m, p);
        for (std::size_t k = 0; k < v.size(); ++k) CHECK(std::abs(back[k] - v[k]) < 1e-14);

        DenseMatrix g = testutil::random_sym(rng, n);
        std::vector<double> adj = prototype_from_coords_adjoint(m, n, g);
        double lhs = frobenius_inner(g, p);
        double rhs = 0;
        for (std::size_t k = 0; k < v.size(); ++k) rhs += adj[k] * v[k];
        CHECK(rel_err(lhs, rhs) < 1e-13);

        std::vector<double> gv(v.size());
        for (auto& x : gv) x = nd(rng);
        DenseMatrix cadj = prototype_coords_adjoint(m, n, gv);
        double l2 = 0;
        std::vector<double> cp = prototype_coords(m, g);
        for (std::size_t k = 0; k < v.size(); ++k) l2 += gv[k] * cp[k];
        CHECK(rel_err(l2, frobenius_inner(cadj, g)) < 1e-13);
    }
}

TEST_CASE("LSM coordinate example") {
    std::vector<double> v{std::sqrt(3.0), 0.0, 0.0};
    DenseMatrix r = prototype_from_coords(MetricKind::LSM, 3, v);
    CHECK(r(0, 0) == doctest::Approx(1.0));
    CHECK(r(2, 0) == doctest::Approx(-1.0));
    CHECK(r(0, 2) == doctest::Approx(-1.0));
    CHECK(r(2, 2) == doctest::Approx(1.0));
    CHECK(r(1, 1) == 0.0);
}
