#include "cornet/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cornet/layers.hpp"

namespace cornet {

namespace {

constexpr std::size_t kBenchInputs = 30;
constexpr std::size_t kBenchHidden = 20;
constexpr std::size_t kBenchClasses = 10;

struct BenchNet {
    FcParams fc;
    MlrParams mlr;
};

}  // namespace

std::vector<BenchRow> bench_forward(const std::vector<MetricKind>& metrics, const std::vector<std::size_t>& dims,
                                    std::size_t repeats, std::uint64_t seed) {
    if (repeats == 0) throw Error(ErrorCode::InvalidArgument, "repeats must be positive");
    for (auto n : dims)
        if (n < 4) throw Error(ErrorCode::InvalidArgument, "bench dims must be >= 4");
    std::vector<BenchRow> rows;
    for (auto n : dims) {
        std::mt19937_64 rng(seed + n);
        std::vector<CorrelationMatrix> inputs;
        for (std::size_t i = 0; i < kBenchInputs; ++i) inputs.push_back(random_correlation(n, 0.3, rng));
        std::vector<BenchNet> nets;
        for (auto m : metrics)
            nets.push_back({FcParams::init(m, n, kBenchHidden, 1, 1, rng),
                            MlrParams::init(m, kBenchHidden, 1, kBenchClasses, rng)});

        std::vector<std::vector<double>> samples(metrics.size());
        double sink = 0.0;
        for (std::size_t r = 0; r < repeats; ++r)
            for (std::size_t k = 0; k < metrics.size(); ++k) {
                const auto t0 = std::chrono::steady_clock::now();
                for (const auto& x : inputs) {
                    auto y = cor_fc(std::span(&x, 1), nets[k].fc);
                    sink += cor_mlr_logits(y, nets[k].mlr)[0];
                }
                const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                samples[k].push_back(dt / double(kBenchInputs));
            }
        if (std::isnan(sink)) throw Error(ErrorCode::NoConvergence, "bench produced NaN logits");

        for (std::size_t k = 0; k < metrics.size(); ++k) {
            double mean = 0.0, var = 0.0;
            for (double s : samples[k]) mean += s;
            mean /= double(repeats);
            for (double s : samples[k]) var += (s - mean) * (s - mean);
            const double sd = repeats > 1 ? std::sqrt(var / double(repeats - 1)) : 0.0;
            rows.push_back({metrics[k], n, repeats, mean, sd});
        }
    }
    return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream o;
    o << "metric,n,repeats,mean_seconds,stddev_seconds\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g,%.9g", r.n, r.repeats, r.mean_seconds, r.stddev_seconds);
        o << metric_name(r.metric) << ',' << buf << '\n';
    }
    return o.str();
}

std::vector<HyperplaneRow> hyperplane_grid(MetricKind metric, const std::vector<double>& z,
                                           const std::vector<std::size_t>& z_shape, double gamma, std::size_t k) {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "grid must be positive");
    MlrParams p = MlrParams::zeros(metric, 3, 1, 1);
    if (is_log_euclidean(metric)) {
        if (z_shape != std::vector<std::size_t>{3, 3} || z.size() != 9)
            throw Error(ErrorCode::InvalidDimension, "hyperplane needs a 3x3 hollow symmetric z");
        DenseMatrix zm(3, 3);
        std::copy(z.begin(), z.end(), zm.data().begin());
        const DenseMatrix hz = HollowSymmetric::validated(zm).matrix();
        std::size_t s = 0;
        for (auto [i, j] : lower_pairs(3)) p.z(0, s++) = hz(i, j);
    } else {
        if (z.size() != 3 || !(z_shape == std::vector<std::size_t>{3} || z_shape == std::vector<std::size_t>{1, 3}))
            throw Error(ErrorCode::InvalidDimension, "hyperplane needs a Poincare vector of length 3");
        for (std::size_t s = 0; s < 3; ++s) p.z(0, s) = z[s];
    }
    p.gamma(0, 0) = gamma;

    std::vector<HyperplaneRow> rows;
    auto coord = [k](std::size_t i) { return -1.0 + double(2 * i + 1) / double(k); };
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b)
            for (std::size_t c = 0; c < k; ++c) {
                const double r21 = coord(a), r31 = coord(b), r32 = coord(c);
                DenseMatrix m = DenseMatrix::from_rows({{1, r21, r31}, {r21, 1, r32}, {r31, r32, 1}});
                if (check_correlation(m) != CorrelationCheck::Ok) continue;
                const CorrelationMatrix cm = CorrelationMatrix::trusted(std::move(m));
                rows.push_back({r21, r31, r32, cor_mlr_logits(std::span(&cm, 1), p)[0]});
            }
    return rows;
}

}  // namespace cornet
