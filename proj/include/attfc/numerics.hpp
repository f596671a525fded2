#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace attfc {

/// Base error for contract violations (bad shapes, invalid arguments).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values or tolerance breaches. The CLI maps these to exit code 2.
class NumericalError : public Error {
public:
    using Error::Error;
};

using Vec = std::vector<double>;

/// Logit value that removes a slot from a softmax.
inline constexpr double kMaskedLogit = -std::numeric_limits<double>::infinity();

/// Dense row-major matrix. Dimensions are checked by every operation that takes two of them.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    void set_row(std::size_t r, std::span<const double> v);

    bool operator==(const Mat&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// Numerically stable softmax. Entries equal to kMaskedLogit get probability exactly 0.
/// Throws on empty input, NaN/+inf entries, or when every entry is masked ("no finite logit").
Vec softmax(std::span<const double> logits);

/// log(sum(exp(logits))) over the unmasked entries; same preconditions as softmax.
double log_sum_exp(std::span<const double> logits);

/// Cosine of the angle between a and b, clamped to [-1, 1].
double cosine_similarity(std::span<const double> a, std::span<const double> b);

Vec l2_normalize(std::span<const double> v);
void l2_normalize_inplace(std::span<double> v);

bool is_unit(std::span<const double> v, double tol = 1e-6);

using ScalarFn = std::function<double(std::span<const double>)>;

/// Central-difference gradient of fn at x with step h.
Vec finite_diff_grad(const ScalarFn& fn, std::span<const double> x, double h = 1e-5);

/// ||a - b||_2 / max(||a||_2, ||b||_2, floor).
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-8);

}  // namespace attfc
