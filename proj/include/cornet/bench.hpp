#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cornet/geometry.hpp"

namespace cornet {

struct BenchRow {
    MetricKind metric = MetricKind::ECM;
    std::size_t n = 0;
    std::size_t repeats = 0;
    double mean_seconds = 0.0;
    double stddev_seconds = 0.0;
};

/// Mean wall time of one FC(n -> 20) + MLR(10 classes) forward on random inputs.
/// Repeats are interleaved across metrics so slow drifts hit every metric alike.
std::vector<BenchRow> bench_forward(const std::vector<MetricKind>& metrics, const std::vector<std::size_t>& dims,
                                    std::size_t repeats, std::uint64_t seed = 0);

std::string bench_csv(const std::vector<BenchRow>& rows);

struct HyperplaneRow {
    double r21 = 0, r31 = 0, r32 = 0, v = 0;
};

/// MLR logit of one class over the k^3 grid of cell centres in [-1, 1]^3, keeping positive
/// definite points. z: hollow 3x3 (Log-Euclidean) or a 3-vector (PHCM). Throws InvalidDimension otherwise.
std::vector<HyperplaneRow> hyperplane_grid(MetricKind metric, const std::vector<double>& z,
                                           const std::vector<std::size_t>& z_shape, double gamma, std::size_t k);

}  // namespace cornet
