#include "attfc/similarity_head.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace attfc {

void MarginConfig::validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw Error("margin.scale must be positive");
    }
    if (!(margin >= 0.0 && margin < std::numbers::pi / 2)) {
        throw Error("margin.margin must lie in [0, pi/2)");
    }
}

std::string to_string(SimilarityMode mode) { return mode == SimilarityMode::plain ? "plain" : "arcface"; }

SimilarityMode similarity_mode_from_string(const std::string& name) {
    if (name == "plain") {
        return SimilarityMode::plain;
    }
    if (name == "arcface") {
        return SimilarityMode::arcface;
    }
    throw Error("unknown similarity mode '" + name + "' (expected plain|arcface)");
}

namespace {

double margined_angle(double cos_theta, const MarginConfig& cfg) {
    const double theta = std::acos(std::clamp(cos_theta, -1.0, 1.0));
    return std::min(theta + cfg.margin, std::numbers::pi);
}

}  // namespace

double arcface_positive_logit(double cos_theta, const MarginConfig& cfg) {
    return cfg.scale * std::cos(margined_angle(cos_theta, cfg));
}

double arcface_positive_angular_slope(double cos_theta, const MarginConfig& cfg) {
    const double theta = std::acos(std::clamp(cos_theta, -1.0, 1.0));
    if (theta + cfg.margin >= std::numbers::pi) {
        return 0.0;
    }
    return cfg.scale * std::sin(theta + cfg.margin);
}

Vec logits(std::span<const double> f, const Mat& centers, std::optional<std::size_t> positive,
           const MarginConfig& cfg) {
    if (centers.cols() != f.size()) {
        throw Error("logits: feature width does not match center width");
    }
    if (positive && *positive >= centers.rows()) {
        throw Error("logits: positive index out of range");
    }
    Vec out(centers.rows());
    if (cfg.mode == SimilarityMode::plain) {
        for (std::size_t j = 0; j < centers.rows(); ++j) {
            out[j] = dot(centers.row(j), f);
        }
        return out;
    }

    constexpr double kUnitTol = 1e-6;
    if (!is_unit(f, kUnitTol)) {
        throw Error("logits: arcface mode requires a unit-norm feature");
    }
    for (std::size_t j = 0; j < centers.rows(); ++j) {
        const auto w = centers.row(j);
        const double c = dot(w, f);
        if (std::abs(dot(w, w) - 1.0) > 2 * kUnitTol) {
            throw Error("logits: arcface mode requires unit-norm centers (slot " + std::to_string(j) + ")");
        }
        const double clamped = std::clamp(c, -1.0, 1.0);
        out[j] = (positive && j == *positive) ? arcface_positive_logit(clamped, cfg) : cfg.scale * clamped;
    }
    return out;
}

}  // namespace attfc
