#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace attfc {

struct GradcheckOptions {
    std::size_t trials = 100;
    /// Instance sizes are drawn uniformly from [2, max_*] ([1, max_batch] for the batch).
    std::size_t max_dim = 16;
    std::size_t max_slots = 32;
    std::size_t max_batch = 8;
    std::uint64_t seed = 0;
    double plain_tolerance = 1e-5;
    double arcface_tolerance = 1e-4;
    /// Fault injection: negates the analytic feature gradient so the plain feature suite must fail.
    bool flip_feature_sign = false;
};

struct SuiteResult {
    std::string name;
    double max_relative_error = 0.0;
    double tolerance = 0.0;
    std::size_t trials = 0;

    bool passed() const { return max_relative_error <= tolerance; }
};

/// Compares every closed-form gradient with central finite differences on random instances.
/// Suites: feature_plain, centers_plain, masked_feature_plain, feature_arcface, centers_arcface,
/// encoder_backward. Throws Error("empty suite") when trials is zero.
std::vector<SuiteResult> run_gradcheck(const GradcheckOptions& options);

}  // namespace attfc
