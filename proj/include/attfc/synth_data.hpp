#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "attfc/dcc.hpp"
#include "attfc/encoders.hpp"
#include "attfc/numerics.hpp"

namespace attfc {

/// Parameters of the synthetic identity generator.
///
/// Each identity gets an anchor drawn uniformly on the unit sphere of the input space. Every image
/// is normalize(anchor + eps) with eps ~ N(0, sigma^2 I); sigma is noise_sigma for clean images and
/// corrupt_sigma for low-quality ones, chosen with probability corrupt_prob (an identity whose
/// images all came up corrupted keeps image 0 clean). The last `heldout_per_identity` images of
/// each identity are reserved for verification.
struct SyntheticDatasetSpec {
    std::size_t identities = 500;
    std::size_t input_dim = 64;
    double noise_sigma = 0.05;
    double corrupt_sigma = 1.0;
    double corrupt_prob = 0.1;
    std::size_t images_per_identity = 8;
    std::size_t heldout_per_identity = 2;
    std::uint64_t seed = 1;

    void validate() const;
    std::size_t train_images_per_identity() const { return images_per_identity - heldout_per_identity; }

    bool operator==(const SyntheticDatasetSpec&) const = default;
};

struct IdentityImage {
    std::span<const double> pixels;
    bool corrupted = false;
};

class SyntheticDataset {
public:
    SyntheticDataset(SyntheticDatasetSpec spec, Mat anchors, Mat images, std::vector<std::uint8_t> corrupted);

    const SyntheticDatasetSpec& spec() const { return spec_; }
    std::size_t identities() const { return anchors_.rows(); }
    std::size_t input_dim() const { return anchors_.cols(); }
    std::size_t images_per_identity() const { return spec_.images_per_identity; }

    std::span<const double> anchor(std::size_t identity) const { return anchors_.row(identity); }
    IdentityImage image(std::size_t identity, std::size_t index) const;

    const Mat& anchors() const { return anchors_; }
    const Mat& images() const { return images_; }
    const std::vector<std::uint8_t>& corrupted_flags() const { return corrupted_; }

    bool operator==(const SyntheticDataset&) const = default;

private:
    SyntheticDatasetSpec spec_;
    Mat anchors_;
    Mat images_;
    std::vector<std::uint8_t> corrupted_;
};

SyntheticDataset make_dataset(const SyntheticDatasetSpec& spec);

enum class SamplerMode { uniform, conflict_stress };

std::string to_string(SamplerMode mode);
SamplerMode sampler_mode_from_string(const std::string& name);

/// One identity image plus k class images of the same identity per sample.
struct SampledBatch {
    std::size_t k = 0;
    Mat identity_images;   // B x input_dim
    Mat class_images;      // (B*k) x input_dim, sample i owns rows [i*k, (i+1)*k)
    std::vector<Label> labels;
    std::vector<std::size_t> identity_image_index;   // per sample, index within its identity
    std::vector<std::size_t> class_image_index;      // B*k
    std::vector<std::uint8_t> identity_corrupted;
    std::vector<std::uint8_t> class_corrupted;

    std::size_t size() const { return labels.size(); }
};

/// Draws B identities uniformly with replacement and, for each, k+1 distinct training images:
/// the first is the identity image, the rest are its class images. In conflict_stress mode the
/// first `duplicates` samples share one identity.
SampledBatch sample_batch(const SyntheticDataset& dataset, std::size_t batch_size, std::size_t k,
                          std::mt19937_64& rng, SamplerMode mode = SamplerMode::uniform,
                          std::size_t duplicates = 0);

using FeatureFn = std::function<Vec(std::span<const double>)>;

FeatureFn encoder_features(const EncoderParams& params);

/// Per identity: normalize(mean of clean-image features). Throws if an identity has no clean image.
Mat empirical_tcc(const SyntheticDataset& dataset, const FeatureFn& features);
Mat empirical_tcc(const SyntheticDataset& dataset, const EncoderParams& encoder);

}  // namespace attfc
