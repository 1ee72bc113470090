#include "doctest.h"
#include "helpers.hpp"

#include "cornet/dsolvers.hpp"

using namespace cornet;
using testutil::rel_err;

namespace {

DenseMatrix exp_of(const DenseMatrix& h, const std::vector<double>& d) {
    return sym_fun(SymFunction::exp(), h + diag_from_vec(d));
}

}  // namespace

TEST_CASE("dplus of zero is zero after one iteration") {
    DplusResult r = dplus(DenseMatrix(4, 4));
    CHECK(r.iterations == 1);
    for (double v : r.d) CHECK(v == 0.0);
}

TEST_CASE("dplus 2x2 closed form") {
    DenseMatrix h = DenseMatrix::from_rows({{0, 1}, {1, 0}});
    DplusResult r = dplus(h);
    CHECK(r.d[0] == doctest::Approx(-std::log(std::cosh(1.0))).epsilon(1e-12));
    CHECK(std::abs(r.d[0] - (-0.433781)) < 1e-6);
    CHECK(std::abs(r.d[1] - r.d[0]) < 1e-15);
}

TEST_CASE("dplus converges on random hollow matrices") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        DenseMatrix h = testutil::random_hollow(rng, 6, 0.5);
        if (max_abs(h) > 2.0) continue;
        DplusResult r = dplus(h);
        CHECK(r.iterations <= 60);
        CHECK(r.residual < 1e-12);
        DenseMatrix e = exp_of(h, r.d);
        for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(e(i, i) - 1.0) < 1e-12);
        // residuals decrease monotonically after the first step
        for (std::size_t k = 2; k < r.residual_history.size(); ++k)
            CHECK(r.residual_history[k] <= r.residual_history[k - 1] * 1.0000001 + 1e-15);
    }
}

TEST_CASE("dplus reports NoConvergence when the budget is too small") {
    std::mt19937_64 rng(4);
    DenseMatrix h = testutil::random_hollow(rng, 6, 1.0);
    try {
        dplus(h, 1e-12, 2);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoConvergence);
    }
}

TEST_CASE("dplus_backward matches finite differences") {
    std::mt19937_64 rng(5);
    for (std::size_t n : {2u, 4u, 6u}) {
        DenseMatrix h = testutil::random_hollow(rng, n, 0.5);
        DenseMatrix g = testutil::random_sym(rng, n);
        auto loss = [&](const DenseMatrix& hh) {
            DplusResult r = dplus(hh, 1e-14, 200);
            return frobenius_inner(g, hh + diag_from_vec(r.d));
        };
        DplusResult r = dplus(h, 1e-14, 200);
        DenseMatrix an = dplus_backward(h, r.d, g);
        for (std::size_t i = 0; i < n; ++i) CHECK(an(i, i) == 0.0);
        DenseMatrix dir = testutil::random_hollow(rng, n);
        double fd = testutil::central_diff_scalar(loss, h, dir, 1e-5);
        CHECK(rel_err(frobenius_inner(an, dir), fd) < 1e-5);
    }
}

TEST_CASE("dplus_diff matches finite differences") {
    std::mt19937_64 rng(6);
    DenseMatrix h = testutil::random_hollow(rng, 5, 0.5);
    DenseMatrix w = testutil::random_hollow(rng, 5);
    DplusResult r = dplus(h, 1e-14, 200);
    SymEig eig = sym_eig(h + diag_from_vec(r.d));
    std::vector<double> an = dplus_diff(eig, w);
    const double step = 1e-5;
    DplusResult rp = dplus(h + step * w, 1e-14, 200);
    DplusResult rm = dplus(h - step * w, 1e-14, 200);
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(an[i] - (rp.d[i] - rm.d[i]) / (2 * step)) < 1e-7);
}

TEST_CASE("dstar identity and closed form") {
    DstarResult r = dstar(DenseMatrix::identity(3));
    CHECK(r.iterations == 0);
    for (double v : r.x) CHECK(v == 1.0);

    DstarResult r2 = dstar(DenseMatrix::from_rows({{1, 0.5}, {0.5, 1}}));
    CHECK(r2.x[0] == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-10));
    CHECK(r2.x[1] == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-10));
}

TEST_CASE("dstar row sums and uniqueness from perturbed starts") {
    std::mt19937_64 rng(7);
    for (std::size_t n : {4u, 8u, 16u}) {
        CorrelationMatrix c = random_correlation(n, 0.5, rng);
        DstarResult r = dstar(c.matrix());
        DenseMatrix s = diag_from_vec(r.x) * c.matrix() * diag_from_vec(r.x);
        for (double v : row_sums(s)) CHECK(std::abs(v - 1.0) < 1e-8);
        std::vector<double> x0(n);
        std::uniform_real_distribution<double> ud(0.5, 2.0);
        for (auto& v : x0) v = ud(rng);
        DstarResult r0 = dstar(c.matrix(), DstarMode::Full, 1e-12, 100, x0);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(r0.x[i] - r.x[i]) < 1e-9);
    }
}

TEST_CASE("dstar newton1 takes exactly one step") {
    CorrelationMatrix c = random_correlation(5, 0.5, 8);
    DstarResult r = dstar(c.matrix(), DstarMode::Newton1);
    CHECK(r.iterations == 1);
    CHECK(r.last_step > 0.0);
    DstarResult full = dstar(c.matrix());
    CHECK(max_abs_diff(DenseMatrix::column(r.x), DenseMatrix::column(full.x)) < 0.5);
}

TEST_CASE("dstar_backward at the identity") {
    std::mt19937_64 rng(9);
    DenseMatrix g = testutil::random_sym(rng, 4);
    DenseMatrix an = dstar_backward(DenseMatrix::identity(4), g);
    std::vector<double> v = diagvec(2.0 * g);
    DenseMatrix w1(4, 4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) w1(i, j) = 0.5 * v[i];
    CHECK(max_abs_diff(an, g - sym(w1)) < 1e-14);
}

TEST_CASE("dstar_backward matches finite differences") {
    std::mt19937_64 rng(10);
    for (std::size_t n : {3u, 6u}) {
        CorrelationMatrix c = random_correlation(n, 0.5, rng);
        DenseMatrix g = testutil::random_sym(rng, n);
        auto sigma_of = [](const DenseMatrix& cc) {
            DstarResult r = dstar(cc, DstarMode::Full, 1e-14, 100);
            return diag_from_vec(r.x) * cc * diag_from_vec(r.x);
        };
        DenseMatrix sigma = sigma_of(c.matrix());
        DenseMatrix an = dstar_backward(sigma, g);
        for (DenseMatrix dir : {testutil::random_hollow(rng, n), testutil::random_sym(rng, n)}) {
            double fd = testutil::central_diff_scalar(
                [&](const DenseMatrix& cc) { return frobenius_inner(g, sigma_of(cc)); }, c.matrix(), dir, 1e-5);
            CHECK(rel_err(frobenius_inner(an, dir), fd) < 1e-6);
        }
    }
}

TEST_CASE("dstar_newton1_backward matches finite differences of the one-step map") {
    std::mt19937_64 rng(11);
    CorrelationMatrix c = random_correlation(5, 0.4, rng);
    std::vector<double> gx(5);
    std::normal_distribution<double> nd;
    for (auto& v : gx) v = nd(rng);
    DstarResult r = dstar(c.matrix(), DstarMode::Newton1);
    DenseMatrix an = dstar_newton1_backward(c.matrix(), r.last_step, gx);
    DenseMatrix dir = testutil::random_sym(rng, 5);
    auto loss = [&](const DenseMatrix& cc) {
        DstarResult rr = dstar(cc, DstarMode::Newton1);
        double s = 0;
        for (std::size_t i = 0; i < 5; ++i) s += gx[i] * rr.x[i];
        return s;
    };
    double fd = testutil::central_diff_scalar(loss, c.matrix(), dir, 1e-6);
    CHECK(rel_err(frobenius_inner(an, dir), fd) < 1e-7);
}
