#pragma once

#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "attfc/checkpoint.hpp"
#include "attfc/dcc.hpp"
#include "attfc/encoders.hpp"
#include "attfc/synth_data.hpp"
#include "attfc/train_config.hpp"

namespace attfc {

/// One row of the metrics stream. Optional fields are only measured on evaluation steps
/// (or, for step_ms, when timing is enabled).
struct MetricsRecord {
    std::uint64_t step = 0;
    double loss = 0.0;
    double lr = 0.0;
    std::size_t conflicts = 0;
    std::optional<double> gcc_tcc_cos;
    std::optional<double> verif_acc;
    std::uint64_t head_params = 0;
    std::optional<double> step_ms;
    /// Debug mode only: max relative error of the center gradient against finite differences.
    std::optional<double> center_grad_error;
};

/// Analytic memory accounting at a declared precision.
struct MemoryEstimate {
    std::uint64_t head_params = 0;
    std::uint64_t encoder_params = 0;
    std::uint64_t optimizer_values = 0;
    std::uint64_t activation_values = 0;
    std::uint64_t bytes_per_value = 8;

    std::uint64_t total_values() const { return head_params + encoder_params + optimizer_values + activation_values; }
    std::uint64_t total_bytes() const { return total_values() * bytes_per_value; }
};

enum class StepPhase {
    sampled,           // batch drawn, nothing mutated yet
    enqueued,          // GCCs written into the container (attfc only)
    loss_computed,     // loss and feature gradients ready, before backward + SGD
    sgd_applied,       // feature encoder (and fc centers) updated
    momentum_applied,  // class encoder updated (attfc only)
};

class Trainer;

struct StepEvent {
    StepPhase phase;
    const Trainer& trainer;
    const SampledBatch& batch;
    std::span<const std::size_t> positive_slots;
    std::span<const std::vector<std::size_t>> conflicts;
};

using StepObserver = std::function<void(const StepEvent&)>;

/// Runs the training iteration for the AttFC head or the FC baseline.
///
/// AttFC, per step: sample batch -> feature encoder on identity images -> class encoder on the
/// B*k class images -> GCCs -> enqueue -> conflicts -> masked loss -> feature gradient -> encoder
/// backward -> SGD on the feature encoder -> momentum update of the class encoder. Nothing is
/// back-propagated into the container or the class encoder.
///
/// FC: a learned D x N center matrix scored without masking, updated by SGD from the center
/// gradient and renormalized to unit rows after every step.
class Trainer {
public:
    explicit Trainer(TrainConfig cfg);
    static Trainer resume(const Checkpoint& ckpt);

    const TrainConfig& config() const { return cfg_; }
    std::uint64_t steps_done() const { return step_; }
    std::uint64_t total_steps() const { return total_steps_; }
    bool done() const { return step_ >= total_steps_; }

    /// Runs one iteration. Throws NumericalError on a non-finite loss.
    MetricsRecord step();

    const SyntheticDataset& dataset() const { return dataset_; }
    const EncoderParams& feature_encoder() const { return feature_encoder_; }
    const EncoderParams& class_encoder() const { return class_encoder_; }
    const OptimizerState& optimizer() const { return optimizer_; }
    const Dcc* dcc() const { return dcc_ ? &*dcc_ : nullptr; }
    const Mat* fc_centers() const { return cfg_.head == HeadMode::fc ? &fc_centers_ : nullptr; }
    std::uint64_t head_params() const;

    void set_observer(StepObserver observer) { observer_ = std::move(observer); }

    /// Verification accuracy of the current feature encoder on a fixed set of held-out pairs.
    double evaluate() const;

    MemoryEstimate memory_estimate(std::uint64_t bytes_per_value = 8) const;

    Checkpoint checkpoint() const;

private:
    void notify(StepPhase phase, const SampledBatch& batch, std::span<const std::size_t> positives,
                std::span<const std::vector<std::size_t>> conflicts) const;
    bool is_eval_step(std::uint64_t step) const;
    EncoderParams backward_batch(const std::vector<ForwardResult>& forwards, const Mat& feature_grads) const;
    MetricsRecord step_attfc();
    MetricsRecord step_fc();

    TrainConfig cfg_;
    SyntheticDataset dataset_;
    std::uint64_t total_steps_ = 0;
    std::uint64_t step_ = 0;
    EncoderParams feature_encoder_;
    EncoderParams class_encoder_;
    OptimizerState optimizer_;
    std::optional<Dcc> dcc_;
    Mat fc_centers_;
    OptimizerState center_optimizer_;
    std::mt19937_64 sampler_rng_;
    StepObserver observer_;
};

/// Seed of an independent random stream derived from the run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace attfc
