#include "doctest.h"
#include "helpers.hpp"

#include "cornet/correlation.hpp"

using namespace cornet;
using testutil::central_diff;
using testutil::rel_err;

TEST_CASE("cor_of example") {
    CorrelationMatrix c = cor_of(DenseMatrix::from_rows({{4, 2}, {2, 9}}));
    CHECK(c(0, 0) == 1.0);
    CHECK(c(1, 1) == 1.0);
    CHECK(c(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("cor_of is idempotent and rejects bad input") {
    std::mt19937_64 rng(1);
    DenseMatrix s = testutil::random_spd(rng, 5);
    CorrelationMatrix c = cor_of(s);
    CHECK(max_abs_diff(cor_of(c.matrix()).matrix(), c.matrix()) < 1e-15);
    try {
        cor_of(DenseMatrix::from_rows({{1, 0}, {0, -1}}));
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonPositiveDiagonal);
    }
    try {
        cor_of(DenseMatrix::from_rows({{1, 2}, {2, 1}}));
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotPositiveDefinite);
    }
}

TEST_CASE("cor_diff matches finite differences and cor_backward is its adjoint") {
    std::mt19937_64 rng(2);
    DenseMatrix s = testutil::random_spd(rng, 5);
    DenseMatrix v = testutil::random_sym(rng, 5);
    DenseMatrix fd = central_diff([](const DenseMatrix& x) { return cor_of(x).matrix(); }, s, v);
    CHECK(rel_err(cor_diff(s, v), fd) < 1e-8);
    DenseMatrix g = testutil::random_sym(rng, 5);
    CHECK(rel_err(frobenius_inner(g, cor_diff(s, v)), frobenius_inner(cor_backward(s, g), v)) < 1e-12);
}

TEST_CASE("validation") {
    CHECK(check_correlation(DenseMatrix::identity(3)) == CorrelationCheck::Ok);
    CHECK(check_correlation(DenseMatrix::from_rows({{1, 0.5}, {0.4, 1}})) == CorrelationCheck::NotSymmetric);
    CHECK(check_correlation(DenseMatrix::from_rows({{1, 0.5}, {0.5, 1.1}})) == CorrelationCheck::BadDiagonal);
    CHECK(check_correlation(DenseMatrix::from_rows({{1, 1}, {1, 1}})) == CorrelationCheck::NotPositiveDefinite);
    CHECK_THROWS_AS(CorrelationMatrix::validated(DenseMatrix::from_rows({{1, 1}, {1, 1}})), Error);
    CHECK_THROWS_AS(HollowSymmetric::validated(DenseMatrix::identity(2)), Error);
    CHECK_THROWS_AS(StrictLowerTriangular::validated(DenseMatrix::identity(2)), Error);
    CHECK_THROWS_AS(RowZeroSymmetric::validated(DenseMatrix::identity(2)), Error);
}

TEST_CASE("theta example and inverse") {
    CorrelationMatrix c = CorrelationMatrix::validated(DenseMatrix::from_rows({{1, 0.6}, {0.6, 1}}));
    DenseMatrix k = theta(c);
    CHECK(k(0, 0) == 1.0);
    CHECK(k(1, 1) == 1.0);
    CHECK(k(1, 0) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(max_abs_diff(theta_inv(k).matrix(), c.matrix()) < 1e-15);

    std::mt19937_64 rng(3);
    for (std::size_t n : {3u, 8u, 16u}) {
        CorrelationMatrix r = random_correlation(n, 0.4, rng);
        CHECK(max_abs_diff(theta_inv(theta(r)).matrix(), r.matrix()) < 1e-13);
    }
}

TEST_CASE("theta differential, inverse, adjoint") {
    std::mt19937_64 rng(4);
    CorrelationMatrix c = random_correlation(5, 0.5, rng);
    DenseMatrix l = chol(c.matrix());
    DenseMatrix th = theta(c);
    DenseMatrix v = testutil::random_hollow(rng, 5);
    DenseMatrix fd = central_diff(
        [](const DenseMatrix& x) {
            DenseMatrix lx = chol(x);
            for (std::size_t i = 0; i < lx.rows(); ++i) {
                double d = lx(i, i);
                for (std::size_t j = 0; j <= i; ++j) lx(i, j) /= d;
            }
            return lx;
        },
        c.matrix(), v);
    DenseMatrix an = theta_diff(l, th, v);
    CHECK(rel_err(an, fd) < 1e-8);
    CHECK(max_abs_diff(theta_diff_inv(l, an), v) < 1e-12);

    // inverse differential agrees with the differential of Theta^{-1}
    DenseMatrix xi = testutil::random_strict_lower(rng, 5);
    DenseMatrix fd_inv = central_diff([](const DenseMatrix& k) { return theta_inv(k).matrix(); }, th, xi);
    CHECK(rel_err(theta_diff_inv(l, xi), fd_inv) < 1e-8);

    DenseMatrix g = testutil::random_strict_lower(rng, 5);
    DenseMatrix w = testutil::random_sym(rng, 5);
    CHECK(rel_err(frobenius_inner(g, theta_diff(l, th, w)), frobenius_inner(theta_backward(l, th, g), w)) < 1e-12);
}

TEST_CASE("random_correlation is deterministic and valid") {
    CorrelationMatrix a = random_correlation(6, 0.5, 42);
    CorrelationMatrix b = random_correlation(6, 0.5, 42);
    CHECK(max_abs_diff(a.matrix(), b.matrix()) == 0.0);
    CHECK(check_correlation(a.matrix()) == CorrelationCheck::Ok);
    CHECK(max_abs_diff(random_correlation(4, 0.0, 1).matrix(), DenseMatrix::identity(4)) == 0.0);
}

TEST_CASE("hol_basis") {
    auto b2 = hol_basis(2);
    REQUIRE(b2.size() == 1);
    CHECK(b2[0].matrix()(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(b2[0].matrix()(1, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));
    auto b = hol_basis(6);
    REQUIRE(b.size() == 15);
    for (std::size_t i = 0; i < b.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            CHECK(std::abs(frobenius_inner(b[i].matrix(), b[j].matrix()) - (i == j ? 1.0 : 0.0)) < 1e-12);
    // row-major over i > j: (1,0), (2,0), (2,1), ...
    CHECK(b[2].matrix()(2, 1) != 0.0);
}

TEST_CASE("rowzero coordinate basis example and structure") {
    auto t2 = rowzero_coordinate_basis(2);
    REQUIRE(t2.size() == 1);
    double s3 = 1.0 / std::sqrt(3.0);
    CHECK(max_abs_diff(t2[0].matrix(), DenseMatrix::from_rows({{s3, -s3}, {-s3, s3}})) < 1e-15);
    auto t4 = rowzero_coordinate_basis(4);
    CHECK(t4.size() == 6);
    for (const auto& e : t4)
        for (double r : row_sums(e.matrix())) CHECK(r == 0.0);
}

TEST_CASE("rowzero_basis is orthonormal with zero row sums") {
    for (std::size_t m : {2u, 3u, 5u, 8u}) {
        auto b = rowzero_basis(m);
        REQUIRE(b.size() == lower_count(m));
        for (std::size_t i = 0; i < b.size(); ++i) {
            for (double r : row_sums(b[i].matrix())) CHECK(std::abs(r) < 1e-15);
            for (std::size_t j = 0; j < b.size(); ++j)
                CHECK(std::abs(frobenius_inner(b[i].matrix(), b[j].matrix()) - (i == j ? 1.0 : 0.0)) < 1e-12);
        }
    }
}

TEST_CASE("project_rowzero is an orthogonal projection") {
    std::mt19937_64 rng(5);
    DenseMatrix r = testutil::random_sym(rng, 5);
    DenseMatrix p = project_rowzero(r);
    for (double s : row_sums(p)) CHECK(std::abs(s) < 1e-14);
    CHECK(max_abs_diff(project_rowzero(p), p) < 1e-14);
    // residual orthogonal to the subspace
    for (const auto& b : rowzero_basis(5)) CHECK(std::abs(frobenius_inner(r - p, b.matrix())) < 1e-13);
}

TEST_CASE("unit row cholesky") {
    CorrelationMatrix c = random_correlation(5, 0.5, 9);
    UnitRowCholesky l = UnitRowCholesky::of(c);
    for (std::size_t i = 0; i < 5; ++i) {
        double s = 0;
        for (std::size_t j = 0; j <= i; ++j) s += l.matrix()(i, j) * l.matrix()(i, j);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
    }
    CHECK(max_abs_diff(l.correlation().matrix(), c.matrix()) < 1e-14);
}
