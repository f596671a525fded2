#pragma once

#include <vector>

#include "attfc/numerics.hpp"
#include "attfc/similarity_head.hpp"

namespace attfc {

/// Mean softmax cross-entropy over a batch against a bank of class centers.
struct BatchLossResult {
    double loss = 0.0;
    /// Row i: masked class probabilities of sample i over the bank (B x S).
    Mat probabilities;
    Vec positive_probability;
};

/// Per-sample conflict slots; an empty span means no conflicts for any sample.
using ConflictLists = std::span<const std::vector<std::size_t>>;

/// Rows of `features` are samples, rows of `centers` are class centers. Sample i is scored with
/// `positive_slots[i]` as its margin target and its conflict slots masked out.
/// Per-sample loss is computed as logsumexp(z) - z+, so it stays finite when p+ underflows.
BatchLossResult batch_loss(const Mat& features, const Mat& centers, std::span<const std::size_t> positive_slots,
                           ConflictLists conflicts, const MarginConfig& cfg);

/// Gradient of one sample's loss with respect to its feature, given that sample's probabilities.
///
/// plain:   -(1 - p+) w+ + sum_{j != +} p_j w_j, masked slots contributing nothing (p_j = 0).
/// arcface: the same loss differentiated through the margin logit on the unit sphere, i.e. the
///          gradient of loss(normalize(f)) at unit f.
Vec grad_feature(std::span<const double> probabilities, const Mat& centers, std::size_t positive_slot,
                 std::span<const double> feature, const MarginConfig& cfg);

/// Gradient of the batch-mean loss with respect to every feature (grad_feature / B per row).
Mat batch_grad_features(const BatchLossResult& result, const Mat& features, const Mat& centers,
                        std::span<const std::size_t> positive_slots, const MarginConfig& cfg);

/// Gradient of the batch-mean loss with respect to every center (S x D, one row per center).
///
/// plain:   row i = (1/B) [ -sum_{x in I+} (1 - p+_x) f_x + sum_{y in I-} p_{y,i} f_y ],
///          with I+ / I- the batch samples whose positive slot is / is not i.
/// arcface: the sphere gradient of each center, analogous to grad_feature.
Mat grad_centers(const BatchLossResult& result, const Mat& features, const Mat& centers,
                 std::span<const std::size_t> positive_slots, const MarginConfig& cfg);

}  // namespace attfc
