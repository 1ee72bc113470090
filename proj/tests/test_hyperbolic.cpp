#include "doctest.h"
#include "helpers.hpp"

#include <cmath>

#include "cornet/hyperbolic.hpp"

using namespace cornet;

namespace {

Vec random_vec(std::mt19937_64& rng, std::size_t n, double scale) {
    std::normal_distribution<double> nd(0.0, scale);
    Vec v(n);
    for (auto& x : v) x = nd(rng);
    return v;
}

Vec random_ball(std::mt19937_64& rng, std::size_t n) {
    Vec v = random_vec(rng, n, 1.0);
    double s = 0;
    for (double x : v) s += x * x;
    std::uniform_real_distribution<double> ud(0.0, 0.95);
    double r = ud(rng);
    for (auto& x : v) x *= r / std::sqrt(s);
    return v;
}

double max_diff(const Vec& a, const Vec& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Checks the vjp of a vector map against central differences along random directions.
template <class F, class G>
void check_vjp(F f, G vjp, const Vec& x, std::mt19937_64& rng, double tol) {
    Vec fx = f(x);
    Vec g = random_vec(rng, fx.size(), 1.0);
    Vec an = vjp(x, g);
    Vec dir = random_vec(rng, x.size(), 1.0);
    const double h = 1e-6;
    Vec xp = x, xm = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xp[i] += h * dir[i];
        xm[i] -= h * dir[i];
    }
    Vec fp = f(xp), fm = f(xm);
    double fd = 0, a = 0;
    for (std::size_t i = 0; i < g.size(); ++i) fd += g[i] * (fp[i] - fm[i]) / (2 * h);
    for (std::size_t i = 0; i < x.size(); ++i) a += an[i] * dir[i];
    CHECK(testutil::rel_err(a, fd) < tol);
}

}  // namespace

TEST_CASE("hemisphere and ball round trips") {
    std::mt19937_64 rng(1);
    for (std::size_t n : {1u, 3u, 7u}) {
        for (int t = 0; t < 20; ++t) {
            Vec y = random_ball(rng, n);
            CHECK(max_diff(hs_to_pb(pb_to_hs(y)), y) < 1e-12);
            Vec h = pb_to_hs(y);
            double s = 0;
            for (double x : h) s += x * x;
            CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
            CHECK(h.back() > 0.0);
            CHECK(max_diff(pb_to_hs(hs_to_pb(h)), h) < 1e-12);
        }
    }
    PoincarePoint p = hs_to_pb(HemispherePoint::validated({0.6, 0.8}));
    CHECK(p.coords()[0] == doctest::Approx(1.0 / 3.0));
    CHECK_THROWS_AS(PoincarePoint::validated({1.0, 0.0}), Error);
    CHECK_THROWS_AS(HemispherePoint::validated({0.6, -0.8}), Error);
}

TEST_CASE("ball distance equals hemisphere distance") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 30; ++t) {
        Vec a = random_ball(rng, 4), b = random_ball(rng, 4);
        CHECK(std::abs(poincare_dist(a, b) - hemisphere_dist(pb_to_hs(a), pb_to_hs(b))) < 1e-9);
    }
}

TEST_CASE("log0 / exp0") {
    Vec y{0.5};
    CHECK(pb_log0(y)[0] == doctest::Approx(std::atanh(0.5)).epsilon(1e-14));
    CHECK(std::abs(pb_log0(y)[0] - 0.549306) < 1e-6);
    CHECK(pb_exp0(Vec{0.0, 0.0}) == Vec{0.0, 0.0});
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
        Vec p = random_ball(rng, 5);
        CHECK(max_diff(pb_exp0(pb_log0(p)), p) < 1e-12);
    }
    // far tangent vectors land inside the guard band
    std::size_t before = ball_guard_events();
    Vec far = pb_exp0(Vec{100.0, 0.0});
    CHECK(far[0] < 1.0);
    CHECK(far[0] * far[0] <= 1.0 - kBallGuard);
    CHECK(ball_guard_events() > before);
}

TEST_CASE("vector-Jacobian products of the ball maps") {
    std::mt19937_64 rng(4);
    Vec y = random_ball(rng, 4);
    check_vjp([](const Vec& x) { return pb_log0(x); }, [](const Vec& x, const Vec& g) { return pb_log0_vjp(x, g); }, y,
              rng, 1e-7);
    Vec v = random_vec(rng, 4, 0.7);
    check_vjp([](const Vec& x) { return pb_exp0(x); }, [](const Vec& x, const Vec& g) { return pb_exp0_vjp(x, g); }, v,
              rng, 1e-7);
    check_vjp([](const Vec& x) { return pb_to_hs(x); }, [](const Vec& x, const Vec& g) { return pb_to_hs_vjp(x, g); },
              y, rng, 1e-7);
    Vec h = pb_to_hs(y);
    check_vjp([](const Vec& x) { return hs_to_pb(x); }, [](const Vec& x, const Vec& g) { return hs_to_pb_vjp(x, g); },
              h, rng, 1e-7);
    Vec w = random_vec(rng, 5, 1.0);
    check_vjp([](const Vec& x) { return pb_fc_from_logits(x); },
              [](const Vec& x, const Vec& g) { return pb_fc_from_logits_vjp(x, g); }, w, rng, 1e-7);
}

TEST_CASE("lgamma and beta coefficients") {
    for (double x : {0.5, 1.0, 1.5, 2.0, 3.7, 10.0, 55.5, 300.0})
        CHECK(lgamma_lanczos(x) == doctest::Approx(std::lgamma(x)).epsilon(1e-13));
    // B(1/2, 1/2) = pi
    CHECK(std::exp(log_beta_coef(1.0)) == doctest::Approx(M_PI).epsilon(1e-14));
    // B(1, 1/2) = 2
    CHECK(std::exp(log_beta_coef(2.0)) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("beta concat of one part is the identity and split inverts concat") {
    std::mt19937_64 rng(5);
    Vec p = random_ball(rng, 3);
    std::vector<Vec> one{p};
    CHECK(max_diff(beta_concat(one), p) < 1e-15);

    std::vector<Vec> parts{random_ball(rng, 1), random_ball(rng, 2), random_ball(rng, 3)};
    Vec c = beta_concat(parts);
    CHECK(c.size() == 6);
    std::vector<std::size_t> dims{1, 2, 3};
    auto back = beta_split(c, dims);
    for (std::size_t i = 0; i < 3; ++i) CHECK(max_diff(back[i], parts[i]) < 1e-12);
    std::vector<std::size_t> bad{1, 2};
    try {
        beta_split(c, bad);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DimensionMismatch);
    }
}

TEST_CASE("beta concat is order invariant") {
    // rows concatenated then columns, or columns then rows
    std::mt19937_64 rng(6);
    std::vector<std::vector<Vec>> grid(2, std::vector<Vec>(3));
    std::size_t dims[2][3] = {{1, 4, 2}, {3, 6, 5}};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) grid[i][j] = random_ball(rng, dims[i][j]);
    std::vector<Vec> flat;
    for (auto& row : grid)
        for (auto& v : row) flat.push_back(v);
    Vec direct = beta_concat(flat);
    std::vector<Vec> rows;
    for (auto& row : grid) rows.push_back(beta_concat(row));
    Vec nested = beta_concat(rows);
    CHECK(max_diff(direct, nested) < 1e-10);
}

TEST_CASE("cor_to_ppb example and round trip") {
    CorrelationMatrix c = CorrelationMatrix::validated(DenseMatrix::from_rows({{1, 0.6}, {0.6, 1}}));
    PolyPoincare p = cor_to_ppb(c);
    REQUIRE(p.parts.size() == 1);
    CHECK(p.parts[0][0] == doctest::Approx(1.0 / 3.0));
    std::mt19937_64 rng(7);
    for (std::size_t n : {3u, 6u, 10u}) {
        CorrelationMatrix r = random_correlation(n, 0.5, rng);
        PolyPoincare q = cor_to_ppb(r);
        for (std::size_t i = 0; i < q.parts.size(); ++i) CHECK(q.parts[i].size() == i + 1);
        CHECK(max_abs_diff(ppb_to_cor(q).matrix(), r.matrix()) < 1e-12);
    }
}

TEST_CASE("Poincare MLR logit") {
    Vec z{0.3, -0.4};
    Vec origin{0.0, 0.0};
    CHECK(pb_mlr_logit(origin, z, 0.7) == doctest::Approx(-4.0 * 0.7 * 0.5).epsilon(1e-14));
    CHECK(pb_mlr_logit(origin, Vec{0.0, 0.0}, 0.7) == 0.0);
    std::mt19937_64 rng(8);
    Vec x = random_ball(rng, 2);
    MlrLogitGrad g = pb_mlr_logit_grad(x, z, 0.3);
    CHECK(g.value == doctest::Approx(pb_mlr_logit(x, z, 0.3)));
    const double h = 1e-6;
    for (std::size_t i = 0; i < 2; ++i) {
        Vec xp = x, xm = x, zp = z, zm = z;
        xp[i] += h;
        xm[i] -= h;
        zp[i] += h;
        zm[i] -= h;
        CHECK(g.dx[i] == doctest::Approx((pb_mlr_logit(xp, z, 0.3) - pb_mlr_logit(xm, z, 0.3)) / (2 * h)).epsilon(1e-7));
        CHECK(g.dz[i] == doctest::Approx((pb_mlr_logit(x, zp, 0.3) - pb_mlr_logit(x, zm, 0.3)) / (2 * h)).epsilon(1e-7));
    }
    CHECK(g.dgamma == doctest::Approx((pb_mlr_logit(x, z, 0.3 + h) - pb_mlr_logit(x, z, 0.3 - h)) / (2 * h)).epsilon(1e-7));
}

TEST_CASE("Poincare FC one output is tanh(s/2)") {
    DenseMatrix z(1, 1);
    z(0, 0) = 1.0;
    for (double x : {0.0, 0.3, -0.6}) {
        Vec gamma{0.2};
        Vec in{x};
        double s = pb_mlr_logit(in, Vec{1.0}, 0.2);
        Vec y = pb_fc(in, z, gamma);
        CHECK(y[0] == doctest::Approx(std::tanh(s / 2.0)).epsilon(1e-13));
    }
}
