#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "attfc/dcc.hpp"
#include "attfc/encoders.hpp"
#include "attfc/synth_data.hpp"
#include "attfc/train_config.hpp"

namespace attfc {

/// Full training state. The dataset is not stored: it is regenerated from config.dataset.
struct Checkpoint {
    TrainConfig config;
    std::uint64_t step = 0;
    EncoderParams feature_encoder;
    EncoderParams class_encoder;
    OptimizerState optimizer;
    std::optional<Dcc> dcc;
    std::optional<Mat> fc_centers;
    std::optional<OptimizerState> center_optimizer;
    /// Textual mt19937_64 state of the batch sampler.
    std::string sampler_rng;
};

/// Binary layout, little-endian, version 1:
///   "ATTFCCKP" u32 version
///   str config_json  u64 step
///   encoder feature  encoder class  optimizer
///   u8 has_dcc [mat centers, u64 capacity labels as i64, u64 cursor, u64 enqueues]
///   u8 has_fc  [mat centers, optimizer]
///   str sampler_rng
/// where str = u64 length + bytes, mat = u64 rows + u64 cols + f64 values,
/// encoder = u64 layer widths count + u64 widths + u64 count + f64 values,
/// optimizer = u64 count + f64 velocity, f64 lr0, f64 momentum, f64 weight_decay, u8 schedule,
///             u64 step, u64 total_steps.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

/// "ATTFCDS1" u32 version, the spec fields, mat anchors, mat images, u64 count + u8 flags.
std::string serialize_dataset(const SyntheticDataset& dataset);
SyntheticDataset deserialize_dataset(std::string_view bytes);

void write_file(const std::string& path, std::string_view bytes);
std::string read_file(const std::string& path);

}  // namespace attfc
