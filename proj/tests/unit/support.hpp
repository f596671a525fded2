#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "attfc/numerics.hpp"

namespace testing {

using attfc::Mat;
using attfc::Vec;

inline Mat random_mat(std::size_t rows, std::size_t cols, std::mt19937_64& rng, bool unit_rows = true) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat m(rows, cols);
    for (double& v : m.values()) {
        v = normal(rng);
    }
    if (unit_rows) {
        for (std::size_t r = 0; r < rows; ++r) {
            double n = 0.0;
            for (double v : m.row(r)) {
                n += v * v;
            }
            n = std::sqrt(n);
            for (double& v : m.row(r)) {
                v /= n;
            }
        }
    }
    return m;
}

inline Vec random_unit(std::size_t dim, std::mt19937_64& rng) {
    Mat m = random_mat(1, dim, rng);
    return Vec(m.row(0).begin(), m.row(0).end());
}

// Softmax computed in long double by direct exponentiation, skipping -inf entries.
inline std::vector<long double> softmax_oracle(const std::vector<double>& z) {
    long double mx = -INFINITY;
    for (double v : z) {
        if (std::isfinite(v) && v > mx) {
            mx = v;
        }
    }
    std::vector<long double> p(z.size(), 0.0L);
    long double total = 0.0L;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (std::isfinite(z[i])) {
            p[i] = std::exp(static_cast<long double>(z[i]) - mx);
            total += p[i];
        }
    }
    for (auto& v : p) {
        v /= total;
    }
    return p;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

}  // namespace testing
