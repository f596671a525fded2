#pragma once

#include <cstdint>
#include <vector>

#include "attfc/numerics.hpp"
#include "attfc/similarity_head.hpp"

namespace attfc {

using Label = std::int64_t;
inline constexpr Label kUnassigned = -1;

/// Slots the container needs for N identities at size ratio r: the largest multiple of the
/// batch size not exceeding r*N. Throws "ratio too small for batch size" when that is 0.
std::size_t dcc_capacity(std::size_t identities, double ratio, std::size_t batch_size);

/// Dynamic Class Container: a fixed-capacity FIFO of labeled unit class centers that stands in
/// for the FC weight matrix. Whole batches are written at the cursor, overwriting the oldest.
class Dcc {
public:
    /// Columns drawn from N(0, 1) then normalized; labels unassigned; cursor 0.
    static Dcc init(std::size_t dim, std::size_t capacity, std::uint64_t seed);

    /// Rebuilds a container from serialized parts, re-checking every invariant.
    static Dcc from_parts(Mat centers, std::vector<Label> labels, std::size_t cursor, std::uint64_t enqueues);

    std::size_t capacity() const { return centers_.rows(); }
    std::size_t dim() const { return centers_.cols(); }
    std::size_t cursor() const { return cursor_; }
    std::uint64_t enqueues() const { return enqueues_; }

    /// One center per row (S x D).
    const Mat& centers() const { return centers_; }
    const std::vector<Label>& labels() const { return labels_; }
    Label label(std::size_t slot) const { return labels_.at(slot); }

    /// Writes rows of `gccs` into the slots starting at the cursor and advances it by the batch
    /// size. The batch size must divide the capacity. Returns the first slot written.
    std::size_t enqueue_batch(const Mat& gccs, std::span<const Label> labels);

    /// Slots other than `own_slot` that carry `label`.
    std::vector<std::size_t> find_conflicts(Label label, std::size_t own_slot) const;

    std::size_t assigned_count() const;

    bool operator==(const Dcc&) const = default;

private:
    Dcc(Mat centers, std::vector<Label> labels, std::size_t cursor, std::uint64_t enqueues);

    Mat centers_;
    std::vector<Label> labels_;
    std::size_t cursor_ = 0;
    std::uint64_t enqueues_ = 0;
};

/// Softmax over the logits of f against `centers` with the conflict slots forced to -inf.
/// The positive slot takes the margin. Throws if the positive slot is listed as a conflict.
Vec masked_probabilities(const Mat& centers, std::span<const double> f, std::size_t positive_slot,
                         std::span<const std::size_t> conflict_slots, const MarginConfig& cfg);

Vec masked_probabilities(const Dcc& dcc, std::span<const double> f, std::size_t positive_slot,
                         std::span<const std::size_t> conflict_slots, const MarginConfig& cfg);

/// The masked logits that masked_probabilities normalizes.
Vec masked_logits(const Mat& centers, std::span<const double> f, std::size_t positive_slot,
                  std::span<const std::size_t> conflict_slots, const MarginConfig& cfg);

}  // namespace attfc
