#pragma once

#include <cstdint>
#include <optional>

#include "cornet/model.hpp"

namespace cornet {

struct DatagenParams {
    std::size_t classes = 3;
    std::size_t per_class = 100;
    std::size_t dim = 8;
    std::size_t channels = 2;
    double spread = 0.3;
    double sep = 2.0;
    std::uint64_t seed = 0;
    /// Seed for the per-sample noise; defaults to `seed`. Anchors always come from `seed`.
    std::optional<std::uint64_t> sample_seed;
};

/// Class anchors Exp°(H_c) per channel at pairwise product OLM distance >= sep;
/// samples Exp°(H_c + spread * W) with W hollow symmetric, lower entries N(0, 1). Class-major order.
/// Throws InfeasibleSeparation if the anchors cannot be placed in 1000 attempts.
Dataset generate_dataset(const DatagenParams& p);

}  // namespace cornet
