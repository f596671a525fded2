#pragma once

#include <optional>
#include <string>

#include "attfc/numerics.hpp"

namespace attfc {

enum class SimilarityMode { plain, arcface };

/// Scale and additive angular margin of the classification logits.
///
/// plain:   logit_j = <w_j, f>
/// arcface: logit_j = s*cos(theta_j + m) for the positive slot, s*cos(theta_j) elsewhere,
///          with theta_j = arccos(<w_j, f>) on unit vectors and theta + m clamped to pi.
struct MarginConfig {
    double scale = 64.0;
    double margin = 0.5;
    SimilarityMode mode = SimilarityMode::arcface;

    void validate() const;
};

std::string to_string(SimilarityMode mode);
SimilarityMode similarity_mode_from_string(const std::string& name);

double arcface_positive_logit(double cos_theta, const MarginConfig& cfg);

/// -d(logit)/d(theta) for the positive slot: s*sin(theta + m), or 0 once theta + m hits the clamp.
double arcface_positive_angular_slope(double cos_theta, const MarginConfig& cfg);

/// Logits of f against every row of `centers` (one class center per row).
/// In arcface mode f and all centers must be unit vectors (checked to 1e-6).
Vec logits(std::span<const double> f, const Mat& centers, std::optional<std::size_t> positive,
           const MarginConfig& cfg);

}  // namespace attfc
