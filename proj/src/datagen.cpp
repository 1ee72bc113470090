#include "cornet/datagen.hpp"

#include <cmath>
#include <random>

namespace cornet {

namespace {

DenseMatrix random_hollow(std::size_t n, double sigma, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, sigma);
    DenseMatrix h(n, n);
    for (std::size_t i = 1; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) h(i, j) = h(j, i) = nd(rng);
    return h;
}

double product_dist(const std::vector<DenseMatrix>& a, const std::vector<DenseMatrix>& b) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        const double d = frobenius_norm(a[c] - b[c]);
        s += d * d;
    }
    return std::sqrt(s);
}

CorrelationMatrix olm_exp(const DenseMatrix& h) {
    return phi_inv(PrototypeVector::validated(MetricKind::OLM, h), SolverOptions{1e-13, 500});
}

}  // namespace

Dataset generate_dataset(const DatagenParams& p) {
    if (p.classes == 0 || p.per_class == 0 || p.channels == 0 || p.dim < 2)
        throw Error(ErrorCode::InvalidArgument, "datagen needs positive counts and dim >= 2");
    if (!(p.spread >= 0) || !(p.sep >= 0)) throw Error(ErrorCode::InvalidArgument, "spread and sep must be >= 0");
    const std::size_t n = p.dim, ch = p.channels;

    // Anchors are drawn so that a typical pair sits at 1.5 * sep; retry until every pair clears sep.
    std::mt19937_64 anchor_rng(p.seed);
    const double sigma = 1.5 * p.sep / std::sqrt(2.0 * double(ch * n * (n - 1)));
    std::vector<std::vector<DenseMatrix>> anchors;
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        anchors.clear();
        for (std::size_t c = 0; c < p.classes; ++c) {
            std::vector<DenseMatrix> a;
            for (std::size_t k = 0; k < ch; ++k) a.push_back(random_hollow(n, sigma, anchor_rng));
            anchors.push_back(std::move(a));
        }
        placed = true;
        for (std::size_t a = 0; a < p.classes && placed; ++a)
            for (std::size_t b = 0; b < a && placed; ++b)
                if (product_dist(anchors[a], anchors[b]) < p.sep) placed = false;
    }
    if (!placed)
        throw Error(ErrorCode::InfeasibleSeparation, "could not place " + std::to_string(p.classes) +
                                                         " anchors at distance " + std::to_string(p.sep));

    std::mt19937_64 sample_rng(p.sample_seed.value_or(p.seed) ^ 0x5851f42d4c957f2dull);
    Dataset d;
    d.channels = ch;
    d.n = n;
    for (std::size_t c = 0; c < p.classes; ++c)
        for (std::size_t s = 0; s < p.per_class; ++s) {
            std::vector<CorrelationMatrix> sample;
            for (std::size_t k = 0; k < ch; ++k) {
                DenseMatrix h = anchors[c][k] + p.spread * random_hollow(n, 1.0, sample_rng);
                sample.push_back(olm_exp(h));
            }
            d.samples.push_back(std::move(sample));
            d.labels.push_back(std::uint32_t(c));
        }
    return d;
}

}  // namespace cornet
