#include "attfc/loss_grad.hpp"

#include <cmath>

#include "attfc/dcc.hpp"

namespace attfc {

namespace {

void check_batch_shapes(const Mat& features, const Mat& centers, std::span<const std::size_t> positive_slots) {
    if (features.rows() == 0) {
        throw Error("batch_loss: empty batch");
    }
    if (features.cols() != centers.cols()) {
        throw Error("batch_loss: feature width does not match center width");
    }
    if (positive_slots.size() != features.rows()) {
        throw Error("batch_loss: one positive slot per sample required");
    }
    for (std::size_t slot : positive_slots) {
        if (slot >= centers.rows()) {
            throw Error("batch_loss: positive slot out of range");
        }
    }
}

// Adds scale * (target - c * anchor) / ||target - c * anchor|| to out, where c = <target, anchor>.
// This is the sphere derivative of the margined positive logit; the direction is undefined when
// target and anchor coincide, in which case nothing is added.
void add_unit_tangent(double scale, std::span<const double> target, std::span<const double> anchor, double c,
                      std::span<double> out) {
    Vec tangent(target.begin(), target.end());
    axpy(-c, anchor, tangent);
    const double len = norm(tangent);
    if (len == 0.0) {
        return;
    }
    axpy(scale / len, tangent, out);
}

}  // namespace

BatchLossResult batch_loss(const Mat& features, const Mat& centers, std::span<const std::size_t> positive_slots,
                           ConflictLists conflicts, const MarginConfig& cfg) {
    check_batch_shapes(features, centers, positive_slots);
    if (!conflicts.empty() && conflicts.size() != features.rows()) {
        throw Error("batch_loss: one conflict list per sample required");
    }
    const std::size_t batch = features.rows();
    BatchLossResult result;
    result.probabilities = Mat(batch, centers.rows());
    result.positive_probability.resize(batch);
    double total = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        const std::span<const std::size_t> masked =
            conflicts.empty() ? std::span<const std::size_t>{} : std::span<const std::size_t>(conflicts[i]);
        const Vec z = masked_logits(centers, features.row(i), positive_slots[i], masked, cfg);
        const Vec p = softmax(z);
        result.probabilities.set_row(i, p);
        result.positive_probability[i] = p[positive_slots[i]];
        if (result.positive_probability[i] == 0.0 && z[positive_slots[i]] == kMaskedLogit) {
            throw Error("batch_loss: positive probability is exactly zero");
        }
        total += log_sum_exp(z) - z[positive_slots[i]];
    }
    result.loss = total / static_cast<double>(batch);
    if (!std::isfinite(result.loss)) {
        throw NumericalError("batch_loss: non-finite loss");
    }
    return result;
}

Vec grad_feature(std::span<const double> probabilities, const Mat& centers, std::size_t positive_slot,
                 std::span<const double> feature, const MarginConfig& cfg) {
    if (probabilities.size() != centers.rows() || positive_slot >= centers.rows()) {
        throw Error("grad_feature: shape mismatch");
    }
    const double p_pos = probabilities[positive_slot];
    Vec grad(centers.cols(), 0.0);

    if (cfg.mode == SimilarityMode::plain) {
        axpy(-(1.0 - p_pos), centers.row(positive_slot), grad);
        for (std::size_t j = 0; j < centers.rows(); ++j) {
            if (j != positive_slot && probabilities[j] != 0.0) {
                axpy(probabilities[j], centers.row(j), grad);
            }
        }
        return grad;
    }

    if (feature.size() != centers.cols()) {
        throw Error("grad_feature: feature width does not match center width");
    }
    for (std::size_t j = 0; j < centers.rows(); ++j) {
        if (j == positive_slot || probabilities[j] == 0.0) {
            continue;
        }
        const auto w = centers.row(j);
        const double c = dot(w, feature);
        const double coeff = probabilities[j] * cfg.scale;
        axpy(coeff, w, grad);
        axpy(-coeff * c, feature, grad);
    }
    const auto w_pos = centers.row(positive_slot);
    const double c_pos = dot(w_pos, feature);
    const double slope = arcface_positive_angular_slope(c_pos, cfg);
    add_unit_tangent(-(1.0 - p_pos) * slope, w_pos, feature, c_pos, grad);
    return grad;
}

Mat batch_grad_features(const BatchLossResult& result, const Mat& features, const Mat& centers,
                        std::span<const std::size_t> positive_slots, const MarginConfig& cfg) {
    check_batch_shapes(features, centers, positive_slots);
    const double inv_batch = 1.0 / static_cast<double>(features.rows());
    Mat out(features.rows(), features.cols());
    for (std::size_t i = 0; i < features.rows(); ++i) {
        Vec g = grad_feature(result.probabilities.row(i), centers, positive_slots[i], features.row(i), cfg);
        for (double& v : g) {
            v *= inv_batch;
        }
        out.set_row(i, g);
    }
    return out;
}

Mat grad_centers(const BatchLossResult& result, const Mat& features, const Mat& centers,
                 std::span<const std::size_t> positive_slots, const MarginConfig& cfg) {
    check_batch_shapes(features, centers, positive_slots);
    if (result.probabilities.rows() != features.rows() || result.probabilities.cols() != centers.rows()) {
        throw Error("grad_centers: probability matrix shape mismatch");
    }
    const double inv_batch = 1.0 / static_cast<double>(features.rows());
    Mat grad(centers.rows(), centers.cols());
    for (std::size_t x = 0; x < features.rows(); ++x) {
        const auto f = features.row(x);
        const auto p = result.probabilities.row(x);
        for (std::size_t i = 0; i < centers.rows(); ++i) {
            const bool positive = i == positive_slots[x];
            if (!positive && p[i] == 0.0) {
                continue;
            }
            auto out = grad.row(i);
            if (cfg.mode == SimilarityMode::plain) {
                const double coeff = positive ? -(1.0 - p[i]) : p[i];
                axpy(coeff * inv_batch, f, out);
                continue;
            }
            const auto w = centers.row(i);
            const double c = dot(w, f);
            if (positive) {
                const double slope = arcface_positive_angular_slope(c, cfg);
                add_unit_tangent(-(1.0 - p[i]) * slope * inv_batch, f, w, c, out);
            } else {
                const double coeff = p[i] * cfg.scale * inv_batch;
                axpy(coeff, f, out);
                axpy(-coeff * c, w, out);
            }
        }
    }
    return grad;
}

}  // namespace attfc
