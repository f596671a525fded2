#include "attfc/synth_data.hpp"

#include <numeric>

namespace attfc {

void SyntheticDatasetSpec::validate() const {
    if (identities < 2) {
        throw Error("dataset.identities must be at least 2");
    }
    if (input_dim == 0) {
        throw Error("dataset.input_dim must be positive");
    }
    if (!(noise_sigma >= 0.0)) {
        throw Error("dataset.noise_sigma must be nonnegative");
    }
    if (!(corrupt_sigma >= noise_sigma)) {
        throw Error("dataset.corrupt_sigma must be at least dataset.noise_sigma");
    }
    if (!(corrupt_prob >= 0.0 && corrupt_prob <= 1.0)) {
        throw Error("dataset.corrupt_prob must lie in [0, 1]");
    }
    if (heldout_per_identity >= images_per_identity) {
        throw Error("dataset.images_per_identity must exceed dataset.heldout_per_identity");
    }
}

SyntheticDataset::SyntheticDataset(SyntheticDatasetSpec spec, Mat anchors, Mat images,
                                   std::vector<std::uint8_t> corrupted)
    : spec_(spec), anchors_(std::move(anchors)), images_(std::move(images)), corrupted_(std::move(corrupted)) {
    spec_.validate();
    if (anchors_.rows() != spec_.identities || anchors_.cols() != spec_.input_dim ||
        images_.rows() != spec_.identities * spec_.images_per_identity || images_.cols() != spec_.input_dim ||
        corrupted_.size() != images_.rows()) {
        throw Error("SyntheticDataset: array shapes do not match the spec");
    }
}

IdentityImage SyntheticDataset::image(std::size_t identity, std::size_t index) const {
    if (identity >= identities() || index >= spec_.images_per_identity) {
        throw Error("SyntheticDataset::image: index out of range");
    }
    const std::size_t row = identity * spec_.images_per_identity + index;
    return {images_.row(row), corrupted_[row] != 0};
}

SyntheticDataset make_dataset(const SyntheticDatasetSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::bernoulli_distribution corrupt(spec.corrupt_prob);

    Mat anchors(spec.identities, spec.input_dim);
    Mat images(spec.identities * spec.images_per_identity, spec.input_dim);
    std::vector<std::uint8_t> flags(images.rows(), 0);
    for (std::size_t id = 0; id < spec.identities; ++id) {
        auto anchor = anchors.row(id);
        for (double& v : anchor) {
            v = normal(rng);
        }
        l2_normalize_inplace(anchor);
        const std::size_t first_row = id * spec.images_per_identity;
        bool any_clean = false;
        for (std::size_t j = 0; j < spec.images_per_identity; ++j) {
            flags[first_row + j] = corrupt(rng) ? 1 : 0;
            any_clean = any_clean || flags[first_row + j] == 0;
        }
        // Every identity keeps at least one clean image so its empirical center exists.
        if (!any_clean) {
            flags[first_row] = 0;
        }
        for (std::size_t j = 0; j < spec.images_per_identity; ++j) {
            const std::size_t row = first_row + j;
            const double sigma = flags[row] != 0 ? spec.corrupt_sigma : spec.noise_sigma;
            auto img = images.row(row);
            if (sigma == 0.0) {
                images.set_row(row, anchor);
                continue;
            }
            for (std::size_t d = 0; d < spec.input_dim; ++d) {
                img[d] = anchor[d] + sigma * normal(rng);
            }
            l2_normalize_inplace(img);
        }
    }
    return SyntheticDataset(spec, std::move(anchors), std::move(images), std::move(flags));
}

std::string to_string(SamplerMode mode) { return mode == SamplerMode::uniform ? "uniform" : "conflict_stress"; }

SamplerMode sampler_mode_from_string(const std::string& name) {
    if (name == "uniform") {
        return SamplerMode::uniform;
    }
    if (name == "conflict_stress") {
        return SamplerMode::conflict_stress;
    }
    throw Error("unknown sampler mode '" + name + "' (expected uniform|conflict_stress)");
}

SampledBatch sample_batch(const SyntheticDataset& dataset, std::size_t batch_size, std::size_t k,
                          std::mt19937_64& rng, SamplerMode mode, std::size_t duplicates) {
    const std::size_t train_images = dataset.spec().train_images_per_identity();
    if (batch_size == 0) {
        throw Error("sample_batch: batch size must be positive");
    }
    if (k + 1 > train_images) {
        throw Error("sample_batch: k + 1 exceeds the training images per identity");
    }
    if (mode == SamplerMode::conflict_stress && (duplicates < 2 || duplicates > batch_size)) {
        throw Error("sample_batch: conflict_stress needs 2 <= duplicates <= batch size");
    }

    const std::size_t dim = dataset.input_dim();
    SampledBatch batch;
    batch.k = k;
    batch.identity_images = Mat(batch_size, dim);
    batch.class_images = Mat(batch_size * k, dim);
    batch.labels.resize(batch_size);
    batch.identity_image_index.resize(batch_size);
    batch.class_image_index.resize(batch_size * k);
    batch.identity_corrupted.resize(batch_size);
    batch.class_corrupted.resize(batch_size * k);

    std::uniform_int_distribution<std::size_t> pick_identity(0, dataset.identities() - 1);
    std::vector<std::size_t> order(train_images);
    Label stressed = kUnassigned;
    for (std::size_t i = 0; i < batch_size; ++i) {
        Label label = static_cast<Label>(pick_identity(rng));
        if (mode == SamplerMode::conflict_stress && i < duplicates) {
            if (stressed == kUnassigned) {
                stressed = label;
            }
            label = stressed;
        }
        batch.labels[i] = label;

        // Partial Fisher-Yates: the first k+1 entries become distinct image indices.
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t j = 0; j <= k; ++j) {
            std::uniform_int_distribution<std::size_t> pick(j, train_images - 1);
            std::swap(order[j], order[pick(rng)]);
        }
        const auto id = static_cast<std::size_t>(label);
        const IdentityImage anchor_img = dataset.image(id, order[0]);
        batch.identity_images.set_row(i, anchor_img.pixels);
        batch.identity_image_index[i] = order[0];
        batch.identity_corrupted[i] = anchor_img.corrupted ? 1 : 0;
        for (std::size_t j = 0; j < k; ++j) {
            const IdentityImage img = dataset.image(id, order[j + 1]);
            batch.class_images.set_row(i * k + j, img.pixels);
            batch.class_image_index[i * k + j] = order[j + 1];
            batch.class_corrupted[i * k + j] = img.corrupted ? 1 : 0;
        }
    }
    return batch;
}

FeatureFn encoder_features(const EncoderParams& params) {
    return [&params](std::span<const double> x) { return encode(params, x); };
}

Mat empirical_tcc(const SyntheticDataset& dataset, const FeatureFn& features) {
    Mat out;
    for (std::size_t id = 0; id < dataset.identities(); ++id) {
        Vec mean;
        std::size_t clean = 0;
        for (std::size_t j = 0; j < dataset.images_per_identity(); ++j) {
            const IdentityImage img = dataset.image(id, j);
            if (img.corrupted) {
                continue;
            }
            const Vec f = features(img.pixels);
            if (mean.empty()) {
                mean.assign(f.size(), 0.0);
            }
            axpy(1.0, f, mean);
            ++clean;
        }
        if (clean == 0) {
            throw Error("empirical_tcc: identity " + std::to_string(id) + " has no clean image");
        }
        if (out.empty()) {
            out = Mat(dataset.identities(), mean.size());
        }
        l2_normalize_inplace(mean);
        out.set_row(id, mean);
    }
    return out;
}

Mat empirical_tcc(const SyntheticDataset& dataset, const EncoderParams& encoder) {
    return empirical_tcc(dataset, encoder_features(encoder));
}

}  // namespace attfc
