#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "cornet/linalg.hpp"

namespace testutil {

using cornet::DenseMatrix;

inline DenseMatrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    DenseMatrix m(r, c);
    for (auto& v : m.data()) v = nd(rng);
    return m;
}

inline DenseMatrix random_sym(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
    return cornet::sym(random_matrix(rng, n, n, scale));
}

inline DenseMatrix random_hollow(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
    return cornet::offmat(random_sym(rng, n, scale));
}

inline DenseMatrix random_spd(std::mt19937_64& rng, std::size_t n) {
    DenseMatrix a = random_matrix(rng, n, n);
    DenseMatrix s = a * a.transposed();
    for (std::size_t i = 0; i < n; ++i) s(i, i) += 0.5;
    return s;
}

inline DenseMatrix random_strict_lower(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
    return cornet::strict_lower(random_matrix(rng, n, n, scale));
}

/// Central difference of a matrix-valued map along a direction.
inline DenseMatrix central_diff(const std::function<DenseMatrix(const DenseMatrix&)>& f, const DenseMatrix& x,
                                const DenseMatrix& dir, double h = 1e-6) {
    DenseMatrix plus = f(x + h * dir);
    DenseMatrix minus = f(x - h * dir);
    return (1.0 / (2.0 * h)) * (plus - minus);
}

inline double central_diff_scalar(const std::function<double(const DenseMatrix&)>& f, const DenseMatrix& x,
                                  const DenseMatrix& dir, double h = 1e-6) {
    return (f(x + h * dir) - f(x - h * dir)) / (2.0 * h);
}

inline double rel_err(const DenseMatrix& a, const DenseMatrix& b) {
    double scale = std::max({cornet::frobenius_norm(a), cornet::frobenius_norm(b), 1e-300});
    return cornet::frobenius_norm(a - b) / scale;
}

inline double rel_err(double a, double b) {
    double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / scale;
}

}  // namespace testutil
