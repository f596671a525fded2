#pragma once

#include <string>

#include "attfc/numerics.hpp"

namespace attfc {

/// How a generative class center is built from the k class features of an identity.
enum class GccStrategy { attention, constant, single };

std::string to_string(GccStrategy strategy);
GccStrategy gcc_strategy_from_string(const std::string& name);

/// k class features (rows of length D), each a unit vector.
class ClassFeatureSet {
public:
    explicit ClassFeatureSet(Mat rows);

    std::size_t k() const { return rows_.rows(); }
    std::size_t dim() const { return rows_.cols(); }
    const Mat& rows() const { return rows_; }
    std::span<const double> row(std::size_t i) const { return rows_.row(i); }

private:
    Mat rows_;
};

/// Convex weights over the class features.
struct AttentionWeights {
    Vec alpha;

    /// Throws unless alpha is nonnegative and sums to 1 within 1e-12.
    void validate() const;
};

/// Softmax over cos(f, K_i) / temperature.
AttentionWeights attention_weights(std::span<const double> f, const ClassFeatureSet& features,
                                   double temperature = 1.0);

/// normalize(sum_i alpha_i K_i); throws "degenerate GCC" when the sum vanishes.
Vec generate_gcc(const ClassFeatureSet& features, const AttentionWeights& weights);

Vec constant_weight_gcc(const ClassFeatureSet& features);

/// The first class feature.
Vec single_image_gcc(const ClassFeatureSet& features);

Vec build_gcc(GccStrategy strategy, std::span<const double> f, const ClassFeatureSet& features,
              double temperature = 1.0);

}  // namespace attfc
