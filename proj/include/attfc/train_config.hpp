#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "attfc/attention_loader.hpp"
#include "attfc/similarity_head.hpp"
#include "attfc/synth_data.hpp"

namespace attfc {

/// Thrown for malformed or invalid configuration; messages name the offending field.
class ConfigError : public Error {
public:
    using Error::Error;
};

enum class HeadMode { fc, attfc };

std::string to_string(HeadMode mode);
HeadMode head_mode_from_string(const std::string& name);

/// Everything a training run depends on. Defaults follow the reference setup (batch 384, 5 epochs,
/// r = 0.3, k = 2, gamma = 0.999, lr 0.1, momentum 0.9, weight decay 5e-4, s = 64, m = 0.5, D = 512);
/// configs/toy.json holds the desk-scale settings.
struct TrainConfig {
    SyntheticDatasetSpec dataset;
    HeadMode head = HeadMode::attfc;
    GccStrategy strategy = GccStrategy::attention;
    double attention_temperature = 1.0;

    std::size_t batch_size = 384;
    std::size_t epochs = 5;
    /// Overrides epochs when nonzero.
    std::size_t steps = 0;
    double size_ratio = 0.3;
    std::size_t k = 2;
    double gamma = 0.999;
    MarginConfig margin;

    double lr0 = 0.1;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    bool fc_weight_decay = true;

    std::size_t feature_dim = 512;
    std::vector<std::size_t> hidden = {64};

    SamplerMode sampler = SamplerMode::uniform;
    std::size_t duplicates = 0;

    std::uint64_t seed = 0;
    std::size_t threads = 1;
    /// Evaluate every n steps; 0 evaluates only after the last step.
    std::size_t eval_every = 0;
    std::size_t eval_pairs = 1000;
    bool record_timing = false;
    bool debug_gradcheck = false;

    void validate() const;

    std::size_t steps_per_epoch() const;
    std::size_t total_steps() const;
    std::vector<std::size_t> encoder_widths() const;
    /// Center slots in the head: N for fc, the container capacity for attfc.
    std::size_t head_slots() const;
};

nlohmann::json to_json(const TrainConfig& cfg);

/// Strict: unknown keys and wrong types raise ConfigError naming the dotted field path.
TrainConfig config_from_json(const nlohmann::json& doc);

/// Applies "a.b.c=value"; the value is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Accepts either a config document or a run manifest (its resolved_config is used).
TrainConfig load_config(const std::string& path, const std::vector<std::string>& overrides);

}  // namespace attfc
