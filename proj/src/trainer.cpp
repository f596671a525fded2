#include "attfc/trainer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "attfc/attention_loader.hpp"
#include "attfc/evaluation.hpp"
#include "attfc/loss_grad.hpp"
#include "parallel.hpp"

namespace attfc {

namespace {

// Samples per gradient accumulation chunk; fixed so the reduction order never depends on threads.
constexpr std::size_t kGradChunk = 8;

enum SeedStream : std::uint64_t { kEncoderInit = 0, kHeadInit = 1, kSampler = 2, kEvaluation = 3 };

const TrainConfig& validated(const TrainConfig& cfg) {
    cfg.validate();
    return cfg;
}

Mat random_unit_rows(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        auto row = m.row(r);
        for (double& v : row) {
            v = normal(rng);
        }
        l2_normalize_inplace(row);
    }
    return m;
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over a stream-tagged seed
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Trainer::Trainer(TrainConfig cfg)
    : cfg_(std::move(cfg)),
      dataset_(make_dataset(validated(cfg_).dataset)),
      total_steps_(cfg_.total_steps()),
      sampler_rng_(derive_seed(cfg_.seed, kSampler)) {
    std::mt19937_64 init_rng(derive_seed(cfg_.seed, kEncoderInit));
    feature_encoder_ = EncoderParams::random(cfg_.encoder_widths(), init_rng);
    class_encoder_ = feature_encoder_;
    optimizer_ = OptimizerState::for_size(feature_encoder_.size(), cfg_.lr0, cfg_.momentum, cfg_.weight_decay,
                                          total_steps_);
    const std::size_t dim = cfg_.feature_dim;
    if (cfg_.head == HeadMode::attfc) {
        dcc_ = Dcc::init(dim, cfg_.head_slots(), derive_seed(cfg_.seed, kHeadInit));
    } else {
        fc_centers_ = random_unit_rows(cfg_.dataset.identities, dim, derive_seed(cfg_.seed, kHeadInit));
        center_optimizer_ = OptimizerState::for_size(fc_centers_.size(), cfg_.lr0, cfg_.momentum,
                                                     cfg_.fc_weight_decay ? cfg_.weight_decay : 0.0, total_steps_);
    }
}

Trainer Trainer::resume(const Checkpoint& ckpt) {
    Trainer t(ckpt.config);
    if (!ckpt.feature_encoder.same_shape(t.feature_encoder_) || !ckpt.class_encoder.same_shape(t.class_encoder_) ||
        ckpt.optimizer.velocity.size() != t.optimizer_.velocity.size()) {
        throw Error("Trainer::resume: encoder shapes do not match the config");
    }
    if (ckpt.step > t.total_steps_) {
        throw Error("Trainer::resume: checkpoint step beyond the configured run");
    }
    t.step_ = ckpt.step;
    t.feature_encoder_ = ckpt.feature_encoder;
    t.class_encoder_ = ckpt.class_encoder;
    t.optimizer_ = ckpt.optimizer;
    if (t.cfg_.head == HeadMode::attfc) {
        if (!ckpt.dcc || ckpt.dcc->capacity() != t.dcc_->capacity() || ckpt.dcc->dim() != t.dcc_->dim()) {
            throw Error("Trainer::resume: container missing or mis-sized");
        }
        t.dcc_ = ckpt.dcc;
    } else {
        if (!ckpt.fc_centers || !ckpt.center_optimizer || ckpt.fc_centers->rows() != t.fc_centers_.rows() ||
            ckpt.fc_centers->cols() != t.fc_centers_.cols()) {
            throw Error("Trainer::resume: fc centers missing or mis-sized");
        }
        t.fc_centers_ = *ckpt.fc_centers;
        t.center_optimizer_ = *ckpt.center_optimizer;
    }
    std::istringstream rng_state(ckpt.sampler_rng);
    rng_state >> t.sampler_rng_;
    if (!rng_state) {
        throw Error("Trainer::resume: bad sampler RNG state");
    }
    return t;
}

std::uint64_t Trainer::head_params() const { return head_param_count(cfg_.feature_dim, cfg_.head_slots()); }

void Trainer::notify(StepPhase phase, const SampledBatch& batch, std::span<const std::size_t> positives,
                     std::span<const std::vector<std::size_t>> conflicts) const {
    if (observer_) {
        observer_(StepEvent{phase, *this, batch, positives, conflicts});
    }
}

bool Trainer::is_eval_step(std::uint64_t step) const {
    return step == total_steps_ || (cfg_.eval_every != 0 && step % cfg_.eval_every == 0);
}

double Trainer::evaluate() const {
    std::mt19937_64 rng(derive_seed(cfg_.seed, kEvaluation));
    return evaluate_verification(encoder_features(feature_encoder_), dataset_, cfg_.eval_pairs, rng, cfg_.threads);
}

MetricsRecord Trainer::step() {
    if (done()) {
        throw Error("Trainer::step: run already finished");
    }
    return cfg_.head == HeadMode::attfc ? step_attfc() : step_fc();
}

EncoderParams Trainer::backward_batch(const std::vector<ForwardResult>& forwards, const Mat& feature_grads) const {
    const std::size_t batch = forwards.size();
    const std::size_t chunks = (batch + kGradChunk - 1) / kGradChunk;
    std::vector<EncoderParams> partial(chunks, EncoderParams::zeros(feature_encoder_.widths()));
    detail::parallel_for(chunks, cfg_.threads, [&](std::size_t c) {
        const std::size_t end = std::min(batch, (c + 1) * kGradChunk);
        for (std::size_t i = c * kGradChunk; i < end; ++i) {
            backward(feature_encoder_, forwards[i].tape, feature_grads.row(i), partial[c]);
        }
    });
    EncoderParams total = std::move(partial[0]);
    auto acc = total.mutable_values();
    for (std::size_t c = 1; c < chunks; ++c) {
        axpy(1.0, partial[c].values(), acc);
    }
    return total;
}

MetricsRecord Trainer::step_attfc() {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t batch_size = cfg_.batch_size;
    const std::size_t k = cfg_.k;
    const std::size_t dim = cfg_.feature_dim;

    const SampledBatch batch = sample_batch(dataset_, batch_size, k, sampler_rng_, cfg_.sampler, cfg_.duplicates);
    notify(StepPhase::sampled, batch, {}, {});

    std::vector<ForwardResult> forwards(batch_size);
    detail::parallel_for(batch_size, cfg_.threads, [&](std::size_t i) {
        forwards[i] = forward(feature_encoder_, batch.identity_images.row(i));
    });
    Mat features(batch_size, dim);
    for (std::size_t i = 0; i < batch_size; ++i) {
        features.set_row(i, forwards[i].feature);
    }

    Mat gccs(batch_size, dim);
    detail::parallel_for(batch_size, cfg_.threads, [&](std::size_t i) {
        Mat class_features(k, dim);
        for (std::size_t j = 0; j < k; ++j) {
            class_features.set_row(j, encode(class_encoder_, batch.class_images.row(i * k + j)));
        }
        gccs.set_row(i, build_gcc(cfg_.strategy, features.row(i), ClassFeatureSet(std::move(class_features)),
                                  cfg_.attention_temperature));
    });

    const std::size_t first = dcc_->enqueue_batch(gccs, batch.labels);
    std::vector<std::size_t> positives(batch_size);
    std::vector<std::vector<std::size_t>> conflicts(batch_size);
    std::size_t conflict_count = 0;
    for (std::size_t i = 0; i < batch_size; ++i) {
        positives[i] = (first + i) % dcc_->capacity();
        conflicts[i] = dcc_->find_conflicts(batch.labels[i], positives[i]);
        conflict_count += conflicts[i].size();
    }
    notify(StepPhase::enqueued, batch, positives, conflicts);

    const BatchLossResult loss = batch_loss(features, dcc_->centers(), positives, conflicts, cfg_.margin);
    const Mat feature_grads = batch_grad_features(loss, features, dcc_->centers(), positives, cfg_.margin);
    notify(StepPhase::loss_computed, batch, positives, conflicts);

    const EncoderParams grads = backward_batch(forwards, feature_grads);
    const double lr = sgd_step(feature_encoder_, grads, optimizer_);
    notify(StepPhase::sgd_applied, batch, positives, conflicts);

    momentum_update(class_encoder_, feature_encoder_, cfg_.gamma);
    notify(StepPhase::momentum_applied, batch, positives, conflicts);

    ++step_;
    MetricsRecord rec;
    rec.step = step_;
    rec.loss = loss.loss;
    rec.lr = lr;
    rec.conflicts = conflict_count;
    rec.head_params = head_params();
    if (is_eval_step(step_)) {
        const Mat tcc = empirical_tcc(dataset_, feature_encoder_);
        double total = 0.0;
        for (std::size_t i = 0; i < batch_size; ++i) {
            total += cosine_similarity(gccs.row(i), tcc.row(static_cast<std::size_t>(batch.labels[i])));
        }
        rec.gcc_tcc_cos = total / static_cast<double>(batch_size);
        rec.verif_acc = evaluate();
    }
    if (cfg_.record_timing) {
        rec.step_ms = elapsed_ms(start);
    }
    return rec;
}

namespace {

// Central differences of the batch loss with respect to a few center entries, compared with the
// analytic center gradient. In arcface mode the perturbed row is renormalized, which matches the
// sphere gradient.
double center_gradient_error(const Mat& features, const Mat& centers, std::span<const std::size_t> positives,
                             const Mat& analytic, const MarginConfig& margin) {
    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t i = 0; i < positives.size() && coords.size() < 16; ++i) {
        for (std::size_t d = 0; d < std::min<std::size_t>(4, centers.cols()) && coords.size() < 16; ++d) {
            coords.emplace_back(positives[i], d);
        }
    }
    Vec expected;
    Vec numeric;
    constexpr double h = 1e-5;
    for (const auto& [row, col] : coords) {
        auto loss_at = [&](double delta) {
            Mat c = centers;
            c(row, col) += delta;
            if (margin.mode == SimilarityMode::arcface) {
                l2_normalize_inplace(c.row(row));
            }
            return batch_loss(features, c, positives, {}, margin).loss;
        };
        numeric.push_back((loss_at(h) - loss_at(-h)) / (2 * h));
        expected.push_back(analytic(row, col));
    }
    return relative_error(expected, numeric);
}

}  // namespace

MetricsRecord Trainer::step_fc() {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t batch_size = cfg_.batch_size;
    const std::size_t dim = cfg_.feature_dim;

    const SampledBatch batch = sample_batch(dataset_, batch_size, 0, sampler_rng_, cfg_.sampler, cfg_.duplicates);
    notify(StepPhase::sampled, batch, {}, {});

    std::vector<ForwardResult> forwards(batch_size);
    detail::parallel_for(batch_size, cfg_.threads, [&](std::size_t i) {
        forwards[i] = forward(feature_encoder_, batch.identity_images.row(i));
    });
    Mat features(batch_size, dim);
    std::vector<std::size_t> positives(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
        features.set_row(i, forwards[i].feature);
        positives[i] = static_cast<std::size_t>(batch.labels[i]);
    }

    const BatchLossResult loss = batch_loss(features, fc_centers_, positives, {}, cfg_.margin);
    const Mat feature_grads = batch_grad_features(loss, features, fc_centers_, positives, cfg_.margin);
    const Mat center_grads = grad_centers(loss, features, fc_centers_, positives, cfg_.margin);
    notify(StepPhase::loss_computed, batch, positives, {});

    MetricsRecord rec;
    if (cfg_.debug_gradcheck && is_eval_step(step_ + 1)) {
        rec.center_grad_error = center_gradient_error(features, fc_centers_, positives, center_grads, cfg_.margin);
        if (*rec.center_grad_error > 1e-4) {
            throw NumericalError("debug gradcheck: center gradient disagrees with finite differences");
        }
    }

    const EncoderParams grads = backward_batch(forwards, feature_grads);
    const double lr = sgd_step(feature_encoder_, grads, optimizer_);
    if (sgd_step(fc_centers_.values(), center_grads.values(), center_optimizer_) != 0.0) {
        for (std::size_t r = 0; r < fc_centers_.rows(); ++r) {
            l2_normalize_inplace(fc_centers_.row(r));
        }
    }
    notify(StepPhase::sgd_applied, batch, positives, {});

    ++step_;
    rec.step = step_;
    rec.loss = loss.loss;
    rec.lr = lr;
    rec.conflicts = 0;
    rec.head_params = head_params();
    if (is_eval_step(step_)) {
        const Mat tcc = empirical_tcc(dataset_, feature_encoder_);
        double total = 0.0;
        for (std::size_t i = 0; i < batch_size; ++i) {
            total += cosine_similarity(fc_centers_.row(positives[i]), tcc.row(positives[i]));
        }
        rec.gcc_tcc_cos = total / static_cast<double>(batch_size);
        rec.verif_acc = evaluate();
    }
    if (cfg_.record_timing) {
        rec.step_ms = elapsed_ms(start);
    }
    return rec;
}

MemoryEstimate Trainer::memory_estimate(std::uint64_t bytes_per_value) const {
    MemoryEstimate m;
    m.bytes_per_value = bytes_per_value;
    m.head_params = head_params();
    const std::uint64_t encoder = feature_encoder_.size();
    std::uint64_t width_sum = 0;
    for (std::size_t w : feature_encoder_.widths()) {
        width_sum += w;
    }
    const std::uint64_t batch = cfg_.batch_size;
    const std::uint64_t slots = cfg_.head_slots();
    if (cfg_.head == HeadMode::attfc) {
        m.encoder_params = 2 * encoder;
        m.optimizer_values = encoder;
        m.activation_values = batch * (cfg_.k + 1) * width_sum + batch * slots + batch * cfg_.feature_dim;
    } else {
        m.encoder_params = encoder;
        m.optimizer_values = encoder + m.head_params;
        m.activation_values = batch * width_sum + batch * slots + m.head_params;
    }
    return m;
}

Checkpoint Trainer::checkpoint() const {
    Checkpoint ckpt;
    ckpt.config = cfg_;
    ckpt.step = step_;
    ckpt.feature_encoder = feature_encoder_;
    ckpt.class_encoder = class_encoder_;
    ckpt.optimizer = optimizer_;
    if (dcc_) {
        ckpt.dcc = dcc_;
    } else {
        ckpt.fc_centers = fc_centers_;
        ckpt.center_optimizer = center_optimizer_;
    }
    std::ostringstream rng_state;
    rng_state << sampler_rng_;
    ckpt.sampler_rng = rng_state.str();
    return ckpt;
}

}  // namespace attfc
