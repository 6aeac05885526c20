#pragma once

#include <cstdint>

#include "gda/core/tensor.hpp"

namespace gda::eval {

struct TsneConfig {
    double perplexity = 30.0;
    int iterations = 500;
    double learning_rate = 200.0;
    double early_exaggeration = 4.0;
    int exaggeration_iters = 100;
    uint64_t seed = 12;
};

// Exact (O(n^2)) t-SNE for diagnostic export; deterministic in seed.
// x is (N, D); returns (N, 2). Requires perplexity < N / 3.
Tensor tsne_fit(const Tensor& x, const TsneConfig& cfg);

// Mean silhouette score of a 2-D (or any-D) labeled point set.
double silhouette_score(const Tensor& points, const std::vector<int>& labels);

} // namespace gda::eval
