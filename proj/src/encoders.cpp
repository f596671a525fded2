#include "attfc/encoders.hpp"

#include <atomic>
#include <cmath>
#include <numbers>

namespace attfc {

namespace {

std::uint64_t next_revision() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
}

}  // namespace

EncoderParams::EncoderParams(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
    if (widths_.size() < 2) {
        throw Error("EncoderParams: need at least an input and an output width");
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        if (widths_[l] == 0 || widths_[l + 1] == 0) {
            throw Error("EncoderParams: widths must be positive");
        }
        offsets_.push_back(offset);
        offset += widths_[l + 1] * widths_[l] + widths_[l + 1];
    }
    values_.assign(offset, 0.0);
    revision_ = next_revision();
}

EncoderParams EncoderParams::zeros(std::vector<std::size_t> widths) { return EncoderParams(std::move(widths)); }

EncoderParams EncoderParams::random(std::vector<std::size_t> widths, std::mt19937_64& rng) {
    EncoderParams params(std::move(widths));
    for (std::size_t l = 0; l < params.layer_count(); ++l) {
        std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(params.widths_[l])));
        for (double& w : params.mutable_weights(l)) {
            w = normal(rng);
        }
    }
    return params;
}

EncoderParams EncoderParams::from_values(std::vector<std::size_t> widths, std::vector<double> values) {
    EncoderParams params(std::move(widths));
    if (values.size() != params.values_.size()) {
        throw Error("EncoderParams::from_values: expected " + std::to_string(params.values_.size()) +
                    " values, got " + std::to_string(values.size()));
    }
    params.values_ = std::move(values);
    return params;
}

void EncoderParams::touch() { revision_ = next_revision(); }

std::span<double> EncoderParams::mutable_values() {
    touch();
    return values_;
}

std::span<const double> EncoderParams::weights(std::size_t layer) const {
    return {values_.data() + offsets_.at(layer), widths_[layer + 1] * widths_[layer]};
}

std::span<const double> EncoderParams::biases(std::size_t layer) const {
    return {values_.data() + offsets_.at(layer) + widths_[layer + 1] * widths_[layer], widths_[layer + 1]};
}

std::span<double> EncoderParams::mutable_weights(std::size_t layer) {
    touch();
    return {values_.data() + offsets_.at(layer), widths_[layer + 1] * widths_[layer]};
}

std::span<double> EncoderParams::mutable_biases(std::size_t layer) {
    touch();
    return {values_.data() + offsets_.at(layer) + widths_[layer + 1] * widths_[layer], widths_[layer + 1]};
}

ForwardResult forward(const EncoderParams& params, std::span<const double> input) {
    if (params.layer_count() == 0) {
        throw Error("forward: empty encoder");
    }
    if (input.size() != params.input_width()) {
        throw Error("forward: input width " + std::to_string(input.size()) + " does not match encoder input " +
                    std::to_string(params.input_width()));
    }
    ForwardResult result;
    Tape& tape = result.tape;
    tape.revision = params.revision();
    tape.layer_inputs.emplace_back(input.begin(), input.end());

    const auto& widths = params.widths();
    for (std::size_t l = 0; l < params.layer_count(); ++l) {
        const Vec& x = tape.layer_inputs.back();
        const auto w = params.weights(l);
        const auto b = params.biases(l);
        const std::size_t in = widths[l];
        const std::size_t out = widths[l + 1];
        Vec y(out);
        for (std::size_t o = 0; o < out; ++o) {
            y[o] = b[o] + dot(w.subspan(o * in, in), x);
        }
        if (l + 1 < params.layer_count()) {
            for (double& v : y) {
                v = std::tanh(v);
            }
            tape.layer_inputs.push_back(std::move(y));
        } else {
            tape.output = std::move(y);
        }
    }
    tape.output_norm = norm(tape.output);
    if (tape.output_norm == 0.0 || !std::isfinite(tape.output_norm)) {
        throw NumericalError("forward: encoder output is zero or non-finite");
    }
    result.feature = tape.output;
    for (double& v : result.feature) {
        v /= tape.output_norm;
    }
    return result;
}

Vec encode(const EncoderParams& params, std::span<const double> input) { return forward(params, input).feature; }

void backward(const EncoderParams& params, const Tape& tape, std::span<const double> grad_feature,
              EncoderParams& grads) {
    if (tape.revision != params.revision()) {
        throw Error("backward: stale tape (parameters changed since forward)");
    }
    if (!grads.same_shape(params)) {
        throw Error("backward: gradient buffer shape mismatch");
    }
    if (grad_feature.size() != params.output_width() || tape.layer_inputs.size() != params.layer_count()) {
        throw Error("backward: shape mismatch");
    }

    // Through the normalization: d/dy (y/|y|) = (I - f f^T) / |y|.
    const double inv_norm = 1.0 / tape.output_norm;
    Vec g(grad_feature.begin(), grad_feature.end());
    double radial = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        radial += g[i] * tape.output[i] * inv_norm;
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = (g[i] - radial * tape.output[i] * inv_norm) * inv_norm;
    }

    const auto& widths = params.widths();
    for (std::size_t l = params.layer_count(); l-- > 0;) {
        const std::size_t in = widths[l];
        const std::size_t out = widths[l + 1];
        const Vec& x = tape.layer_inputs[l];
        const auto w = params.weights(l);
        auto gw = grads.mutable_weights(l);
        auto gb = grads.mutable_biases(l);
        for (std::size_t o = 0; o < out; ++o) {
            gb[o] += g[o];
            axpy(g[o], x, gw.subspan(o * in, in));
        }
        if (l == 0) {
            break;
        }
        // x = tanh(previous pre-activation); fold in the tanh derivative.
        Vec g_in(in, 0.0);
        for (std::size_t o = 0; o < out; ++o) {
            axpy(g[o], w.subspan(o * in, in), g_in);
        }
        for (std::size_t i = 0; i < in; ++i) {
            g_in[i] *= 1.0 - x[i] * x[i];
        }
        g = std::move(g_in);
    }
}

OptimizerState OptimizerState::for_size(std::size_t size, double lr0, double momentum, double weight_decay,
                                        std::uint64_t total_steps, LrSchedule schedule) {
    if (total_steps == 0) {
        throw Error("OptimizerState: total_steps must be positive");
    }
    OptimizerState opt;
    opt.velocity.assign(size, 0.0);
    opt.lr0 = lr0;
    opt.momentum = momentum;
    opt.weight_decay = weight_decay;
    opt.schedule = schedule;
    opt.total_steps = total_steps;
    return opt;
}

double OptimizerState::current_lr() const {
    if (schedule == LrSchedule::constant) {
        return lr0;
    }
    return cosine_lr(std::min(step, total_steps), total_steps, lr0);
}

double cosine_lr(std::uint64_t step, std::uint64_t total_steps, double lr0) {
    if (total_steps == 0) {
        throw Error("cosine_lr: total_steps must be positive");
    }
    if (step > total_steps) {
        throw Error("cosine_lr: step beyond total_steps");
    }
    const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
    return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double sgd_step(std::span<double> params, std::span<const double> grads, OptimizerState& opt) {
    if (params.size() != grads.size() || opt.velocity.size() != params.size()) {
        throw Error("sgd_step: shape mismatch");
    }
    for (double g : grads) {
        if (!std::isfinite(g)) {
            throw NumericalError("sgd_step: non-finite gradient");
        }
    }
    const double lr = opt.current_lr();
    for (std::size_t i = 0; i < params.size(); ++i) {
        opt.velocity[i] = opt.momentum * opt.velocity[i] + (grads[i] + opt.weight_decay * params[i]);
        params[i] -= lr * opt.velocity[i];
    }
    ++opt.step;
    return lr;
}

double sgd_step(EncoderParams& params, const EncoderParams& grads, OptimizerState& opt) {
    if (!params.same_shape(grads)) {
        throw Error("sgd_step: gradient shape does not match parameters");
    }
    return sgd_step(params.mutable_values(), grads.values(), opt);
}

void momentum_update(EncoderParams& class_params, const EncoderParams& feature_params, double gamma) {
    if (!class_params.same_shape(feature_params)) {
        throw Error("momentum_update: encoder shapes differ");
    }
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
        throw Error("momentum_update: gamma must lie in [0, 1]");
    }
    if (gamma == 1.0) {
        return;
    }
    auto ce = class_params.mutable_values();
    const auto fe = feature_params.values();
    for (std::size_t i = 0; i < ce.size(); ++i) {
        ce[i] = gamma * ce[i] + (1.0 - gamma) * fe[i];
    }
}

std::size_t param_count(const EncoderParams& params) { return params.size(); }

std::uint64_t head_param_count(std::uint64_t dim, std::uint64_t slots) { return dim * slots; }

}  // namespace attfc
