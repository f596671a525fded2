#include "attfc/dcc.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace attfc {

std::size_t dcc_capacity(std::size_t identities, double ratio, std::size_t batch_size) {
    if (!(ratio > 0.0 && ratio <= 1.0)) {
        throw Error("dcc_capacity: size ratio must lie in (0, 1]");
    }
    if (batch_size == 0) {
        throw Error("dcc_capacity: batch size must be positive");
    }
    // The relative nudge keeps products like 0.3 * 1280 from landing one ulp under an exact multiple.
    const double batches = std::floor(ratio * static_cast<double>(identities) / static_cast<double>(batch_size) *
                                      (1.0 + 1e-12));
    const auto slots = static_cast<std::size_t>(batches) * batch_size;
    if (slots == 0) {
        throw Error("dcc_capacity: ratio too small for batch size");
    }
    return slots;
}

Dcc::Dcc(Mat centers, std::vector<Label> labels, std::size_t cursor, std::uint64_t enqueues)
    : centers_(std::move(centers)), labels_(std::move(labels)), cursor_(cursor), enqueues_(enqueues) {}

Dcc Dcc::init(std::size_t dim, std::size_t capacity, std::uint64_t seed) {
    if (dim == 0) {
        throw Error("Dcc::init: dimension must be positive");
    }
    if (capacity < 2) {
        throw Error("Dcc::init: capacity must be at least 2 (the loss needs a negative)");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat centers(capacity, dim);
    for (std::size_t s = 0; s < capacity; ++s) {
        auto row = centers.row(s);
        for (double& v : row) {
            v = normal(rng);
        }
        l2_normalize_inplace(row);
    }
    return Dcc(std::move(centers), std::vector<Label>(capacity, kUnassigned), 0, 0);
}

Dcc Dcc::from_parts(Mat centers, std::vector<Label> labels, std::size_t cursor, std::uint64_t enqueues) {
    if (centers.rows() < 2 || centers.cols() == 0) {
        throw Error("Dcc::from_parts: bad center matrix shape");
    }
    if (labels.size() != centers.rows()) {
        throw Error("Dcc::from_parts: label count does not match capacity");
    }
    if (cursor >= centers.rows()) {
        throw Error("Dcc::from_parts: cursor out of range");
    }
    for (std::size_t s = 0; s < centers.rows(); ++s) {
        if (!is_unit(centers.row(s))) {
            throw Error("Dcc::from_parts: slot " + std::to_string(s) + " is not unit norm");
        }
    }
    return Dcc(std::move(centers), std::move(labels), cursor, enqueues);
}

std::size_t Dcc::enqueue_batch(const Mat& gccs, std::span<const Label> labels) {
    const std::size_t batch = gccs.rows();
    if (gccs.cols() != dim()) {
        throw Error("Dcc::enqueue_batch: GCC width does not match container dimension");
    }
    if (labels.size() != batch) {
        throw Error("Dcc::enqueue_batch: label count does not match batch size");
    }
    if (batch == 0 || batch > capacity() || capacity() % batch != 0) {
        throw Error("Dcc::enqueue_batch: batch size must divide the capacity");
    }
    for (std::size_t i = 0; i < batch; ++i) {
        if (!is_unit(gccs.row(i))) {
            throw Error("Dcc::enqueue_batch: GCC " + std::to_string(i) + " is not unit norm");
        }
        if (labels[i] < 0) {
            throw Error("Dcc::enqueue_batch: labels must be nonnegative");
        }
    }
    const std::size_t first = cursor_;
    for (std::size_t i = 0; i < batch; ++i) {
        const std::size_t slot = (first + i) % capacity();
        centers_.set_row(slot, gccs.row(i));
        labels_[slot] = labels[i];
    }
    cursor_ = (cursor_ + batch) % capacity();
    ++enqueues_;
    return first;
}

std::vector<std::size_t> Dcc::find_conflicts(Label label, std::size_t own_slot) const {
    if (own_slot >= capacity()) {
        throw Error("Dcc::find_conflicts: slot out of range");
    }
    std::vector<std::size_t> out;
    for (std::size_t s = 0; s < capacity(); ++s) {
        if (s != own_slot && labels_[s] == label) {
            out.push_back(s);
        }
    }
    return out;
}

std::size_t Dcc::assigned_count() const {
    return static_cast<std::size_t>(std::count_if(labels_.begin(), labels_.end(), [](Label l) { return l != kUnassigned; }));
}

Vec masked_logits(const Mat& centers, std::span<const double> f, std::size_t positive_slot,
                  std::span<const std::size_t> conflict_slots, const MarginConfig& cfg) {
    Vec z = logits(f, centers, positive_slot, cfg);
    for (std::size_t s : conflict_slots) {
        if (s == positive_slot) {
            throw Error("masked_probabilities: positive slot listed as a conflict");
        }
        if (s >= z.size()) {
            throw Error("masked_probabilities: conflict slot out of range");
        }
        z[s] = kMaskedLogit;
    }
    return z;
}

Vec masked_probabilities(const Mat& centers, std::span<const double> f, std::size_t positive_slot,
                         std::span<const std::size_t> conflict_slots, const MarginConfig& cfg) {
    return softmax(masked_logits(centers, f, positive_slot, conflict_slots, cfg));
}

Vec masked_probabilities(const Dcc& dcc, std::span<const double> f, std::size_t positive_slot,
                         std::span<const std::size_t> conflict_slots, const MarginConfig& cfg) {
    return masked_probabilities(dcc.centers(), f, positive_slot, conflict_slots, cfg);
}

}  // namespace attfc
