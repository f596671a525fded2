#include "attfc/attention_loader.hpp"

#include <cmath>

namespace attfc {

std::string to_string(GccStrategy strategy) {
    switch (strategy) {
        case GccStrategy::attention:
            return "attention";
        case GccStrategy::constant:
            return "constant";
        case GccStrategy::single:
            return "single";
    }
    return "attention";
}

GccStrategy gcc_strategy_from_string(const std::string& name) {
    if (name == "attention") {
        return GccStrategy::attention;
    }
    if (name == "constant") {
        return GccStrategy::constant;
    }
    if (name == "single") {
        return GccStrategy::single;
    }
    throw Error("unknown GCC strategy '" + name + "' (expected attention|constant|single)");
}

ClassFeatureSet::ClassFeatureSet(Mat rows) : rows_(std::move(rows)) {
    if (rows_.rows() == 0 || rows_.cols() == 0) {
        throw Error("ClassFeatureSet: need at least one non-empty class feature");
    }
    for (std::size_t i = 0; i < rows_.rows(); ++i) {
        if (!is_unit(rows_.row(i))) {
            throw Error("ClassFeatureSet: class feature " + std::to_string(i) + " is not unit norm");
        }
    }
}

void AttentionWeights::validate() const {
    if (alpha.empty()) {
        throw Error("AttentionWeights: empty");
    }
    double total = 0.0;
    for (double a : alpha) {
        if (!(a >= 0.0)) {
            throw Error("AttentionWeights: negative or NaN weight");
        }
        total += a;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw Error("AttentionWeights: weights do not sum to 1");
    }
}

AttentionWeights attention_weights(std::span<const double> f, const ClassFeatureSet& features,
                                   double temperature) {
    if (!(temperature > 0.0)) {
        throw Error("attention_weights: temperature must be positive");
    }
    Vec sims(features.k());
    for (std::size_t i = 0; i < features.k(); ++i) {
        sims[i] = cosine_similarity(f, features.row(i)) / temperature;
    }
    return AttentionWeights{softmax(sims)};
}

Vec generate_gcc(const ClassFeatureSet& features, const AttentionWeights& weights) {
    if (weights.alpha.size() != features.k()) {
        throw Error("generate_gcc: weight count does not match k");
    }
    weights.validate();
    Vec sum(features.dim(), 0.0);
    for (std::size_t i = 0; i < features.k(); ++i) {
        axpy(weights.alpha[i], features.row(i), sum);
    }
    if (norm(sum) < 1e-12) {
        throw Error("generate_gcc: degenerate GCC");
    }
    l2_normalize_inplace(sum);
    return sum;
}

Vec constant_weight_gcc(const ClassFeatureSet& features) {
    const std::size_t k = features.k();
    return generate_gcc(features, AttentionWeights{Vec(k, 1.0 / static_cast<double>(k))});
}

Vec single_image_gcc(const ClassFeatureSet& features) {
    const auto first = features.row(0);
    return Vec(first.begin(), first.end());
}

Vec build_gcc(GccStrategy strategy, std::span<const double> f, const ClassFeatureSet& features,
              double temperature) {
    switch (strategy) {
        case GccStrategy::attention:
            return generate_gcc(features, attention_weights(f, features, temperature));
        case GccStrategy::constant:
            return constant_weight_gcc(features);
        case GccStrategy::single:
            return single_image_gcc(features);
    }
    throw Error("build_gcc: bad strategy");
}

}  // namespace attfc
