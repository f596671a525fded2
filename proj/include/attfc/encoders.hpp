#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "attfc/numerics.hpp"

namespace attfc {

/// Parameters of a small MLP encoder: widths[0] -> widths[1] -> ... -> widths.back().
/// Hidden layers use tanh, the last layer is linear and its output is L2-normalized.
///
/// All weights and biases live in one flat buffer (per layer: out x in weights, row-major,
/// followed by out biases) so optimizers and momentum updates work on a single span.
class EncoderParams {
public:
    EncoderParams() = default;

    static EncoderParams zeros(std::vector<std::size_t> widths);

    /// Weights ~ N(0, 1/fan_in), biases zero.
    static EncoderParams random(std::vector<std::size_t> widths, std::mt19937_64& rng);

    /// Throws if `values` does not hold exactly the parameter count implied by `widths`.
    static EncoderParams from_values(std::vector<std::size_t> widths, std::vector<double> values);

    const std::vector<std::size_t>& widths() const { return widths_; }
    std::size_t layer_count() const { return widths_.empty() ? 0 : widths_.size() - 1; }
    std::size_t input_width() const { return widths_.front(); }
    std::size_t output_width() const { return widths_.back(); }

    std::size_t size() const { return values_.size(); }
    std::span<const double> values() const { return values_; }

    /// Mutable access marks every tape recorded against these parameters as stale.
    std::span<double> mutable_values();

    std::span<const double> weights(std::size_t layer) const;
    std::span<const double> biases(std::size_t layer) const;
    std::span<double> mutable_weights(std::size_t layer);
    std::span<double> mutable_biases(std::size_t layer);

    /// Changes whenever the parameters may have been modified.
    std::uint64_t revision() const { return revision_; }

    bool same_shape(const EncoderParams& other) const { return widths_ == other.widths_; }

    /// Compares shape and values only.
    bool operator==(const EncoderParams& other) const {
        return widths_ == other.widths_ && values_ == other.values_;
    }

private:
    explicit EncoderParams(std::vector<std::size_t> widths);
    void touch();

    std::vector<std::size_t> widths_;
    std::vector<std::size_t> offsets_;
    std::vector<double> values_;
    std::uint64_t revision_ = 0;
};

/// Activations recorded by forward() for backward().
struct Tape {
    std::uint64_t revision = 0;
    /// layer_inputs[l] is the input of layer l (layer_inputs[0] is the encoder input).
    std::vector<Vec> layer_inputs;
    /// Output of the last linear layer before normalization.
    Vec output;
    double output_norm = 0.0;
};

struct ForwardResult {
    Vec feature;
    Tape tape;
};

ForwardResult forward(const EncoderParams& params, std::span<const double> input);

/// forward() without keeping the tape.
Vec encode(const EncoderParams& params, std::span<const double> input);

/// Accumulates d(loss)/d(params) into `grads` (same shape as params) given d(loss)/d(feature).
/// Throws if the tape was recorded against a different revision of the parameters.
void backward(const EncoderParams& params, const Tape& tape, std::span<const double> grad_feature,
              EncoderParams& grads);

enum class LrSchedule { cosine, constant };

/// SGD with momentum and L2 weight decay over one flat parameter buffer.
struct OptimizerState {
    Vec velocity;
    double lr0 = 0.1;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    LrSchedule schedule = LrSchedule::cosine;
    std::uint64_t step = 0;
    std::uint64_t total_steps = 1;

    static OptimizerState for_size(std::size_t size, double lr0, double momentum, double weight_decay,
                                   std::uint64_t total_steps, LrSchedule schedule = LrSchedule::cosine);

    double current_lr() const;

    bool operator==(const OptimizerState&) const = default;
};

/// lr0 * (1 + cos(pi * step / total_steps)) / 2.
double cosine_lr(std::uint64_t step, std::uint64_t total_steps, double lr0);

/// v <- momentum*v + (g + wd*param); param <- param - lr*v; step += 1. Returns the lr used.
double sgd_step(std::span<double> params, std::span<const double> grads, OptimizerState& opt);
double sgd_step(EncoderParams& params, const EncoderParams& grads, OptimizerState& opt);

/// class_params <- gamma * class_params + (1 - gamma) * feature_params, entrywise.
void momentum_update(EncoderParams& class_params, const EncoderParams& feature_params, double gamma);

std::size_t param_count(const EncoderParams& params);

/// Scalar parameters of a classification head holding `slots` centers of width `dim`.
std::uint64_t head_param_count(std::uint64_t dim, std::uint64_t slots);

}  // namespace attfc
