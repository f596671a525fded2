#include "attfc/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace attfc {

void Mat::set_row(std::size_t r, std::span<const double> v) {
    if (r >= rows_ || v.size() != cols_) {
        throw Error("Mat::set_row: shape mismatch");
    }
    std::copy(v.begin(), v.end(), values_.begin() + static_cast<std::ptrdiff_t>(r * cols_));
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error("dot: length mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) {
        throw Error("axpy: length mismatch");
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] += alpha * x[i];
    }
}

namespace {

// Largest unmasked logit; validates the input along the way.
double max_finite_logit(std::span<const double> logits) {
    if (logits.empty()) {
        throw Error("softmax: empty input");
    }
    double best = kMaskedLogit;
    for (double z : logits) {
        if (std::isnan(z) || z == std::numeric_limits<double>::infinity()) {
            throw NumericalError("softmax: non-finite logit");
        }
        best = std::max(best, z);
    }
    if (best == kMaskedLogit) {
        throw Error("softmax: no finite logit");
    }
    return best;
}

}  // namespace

Vec softmax(std::span<const double> logits) {
    const double shift = max_finite_logit(logits);
    Vec p(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = logits[i] == kMaskedLogit ? 0.0 : std::exp(logits[i] - shift);
        total += p[i];
    }
    for (double& v : p) {
        v /= total;
    }
    return p;
}

double log_sum_exp(std::span<const double> logits) {
    const double shift = max_finite_logit(logits);
    double total = 0.0;
    for (double z : logits) {
        if (z != kMaskedLogit) {
            total += std::exp(z - shift);
        }
    }
    return shift + std::log(total);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error("cosine_similarity: length mismatch");
    }
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) {
        throw Error("cosine_similarity: degenerate vector");
    }
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

Vec l2_normalize(std::span<const double> v) {
    Vec out(v.begin(), v.end());
    l2_normalize_inplace(out);
    return out;
}

void l2_normalize_inplace(std::span<double> v) {
    const double n = norm(v);
    if (n == 0.0 || !std::isfinite(n)) {
        throw Error("l2_normalize: zero or non-finite vector");
    }
    for (double& x : v) {
        x /= n;
    }
}

bool is_unit(std::span<const double> v, double tol) { return std::abs(norm(v) - 1.0) <= tol; }

Vec finite_diff_grad(const ScalarFn& fn, std::span<const double> x, double h) {
    if (!(h > 0.0)) {
        throw Error("finite_diff_grad: step must be positive");
    }
    Vec point(x.begin(), x.end());
    Vec grad(x.size());
    for (std::size_t i = 0; i < point.size(); ++i) {
        const double orig = point[i];
        point[i] = orig + h;
        const double up = fn(point);
        point[i] = orig - h;
        const double down = fn(point);
        point[i] = orig;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NumericalError("finite_diff_grad: non-finite function value");
        }
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
    if (a.size() != b.size()) {
        throw Error("relative_error: length mismatch");
    }
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
    }
    return std::sqrt(diff) / std::max({norm(a), norm(b), floor});
}

}  // namespace attfc
