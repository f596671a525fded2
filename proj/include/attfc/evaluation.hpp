#pragma once

#include <cstdint>

#include "attfc/attention_loader.hpp"
#include "attfc/synth_data.hpp"

namespace attfc {

/// Accuracy of the best single threshold separating positive from negative scores
/// (a pair is called positive when its score is >= the threshold).
double best_threshold_accuracy(std::span<const double> positive_scores, std::span<const double> negative_scores);

/// Samples `pairs` same-identity and `pairs` different-identity pairs of held-out images, scores each
/// by the cosine of their features and reports the best-threshold accuracy.
/// Throws when fewer than two held-out images per identity exist.
double evaluate_verification(const FeatureFn& features, const SyntheticDataset& dataset, std::size_t pairs,
                             std::mt19937_64& rng, std::size_t threads = 1);

struct GccQuality {
    double mean_cos = 0.0;
    double variance = 0.0;
    std::size_t samples = 0;
};

/// Monte-Carlo estimate of cos(GCC, empirical TCC): draws `samples` identity/class-image groups,
/// builds each GCC with `strategy` and compares it with the identity's row of `tcc`.
GccQuality measure_gcc_quality(const SyntheticDataset& dataset, const FeatureFn& identity_features,
                               const FeatureFn& class_features, const Mat& tcc, GccStrategy strategy,
                               std::size_t k, std::size_t samples, std::uint64_t seed,
                               double temperature = 1.0);

}  // namespace attfc
