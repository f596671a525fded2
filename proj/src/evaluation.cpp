#include "attfc/evaluation.hpp"

#include <algorithm>
#include <utility>

#include "parallel.hpp"

namespace attfc {

double best_threshold_accuracy(std::span<const double> positive_scores, std::span<const double> negative_scores) {
    const std::size_t total = positive_scores.size() + negative_scores.size();
    if (total == 0) {
        throw Error("best_threshold_accuracy: no scores");
    }
    std::vector<std::pair<double, bool>> scored;
    scored.reserve(total);
    for (double s : positive_scores) {
        scored.emplace_back(s, true);
    }
    for (double s : negative_scores) {
        scored.emplace_back(s, false);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

    // Threshold above every score: everything is called negative.
    long correct = static_cast<long>(negative_scores.size());
    long best = correct;
    for (std::size_t i = 0; i < scored.size();) {
        std::size_t j = i;
        while (j < scored.size() && scored[j].first == scored[i].first) {
            correct += scored[j].second ? 1 : -1;
            ++j;
        }
        best = std::max(best, correct);
        i = j;
    }
    return static_cast<double>(best) / static_cast<double>(total);
}

double evaluate_verification(const FeatureFn& features, const SyntheticDataset& dataset, std::size_t pairs,
                             std::mt19937_64& rng, std::size_t threads) {
    const std::size_t heldout = dataset.spec().heldout_per_identity;
    const std::size_t first_heldout = dataset.spec().train_images_per_identity();
    const std::size_t n = dataset.identities();
    if (heldout < 2) {
        throw Error("evaluate_verification: need at least two held-out images per identity");
    }
    if (pairs == 0) {
        throw Error("evaluate_verification: pair count must be positive");
    }

    struct Pair {
        std::size_t id_a, img_a, id_b, img_b;
    };
    std::vector<Pair> positive(pairs);
    std::vector<Pair> negative(pairs);
    std::uniform_int_distribution<std::size_t> pick_id(0, n - 1);
    std::uniform_int_distribution<std::size_t> pick_img(0, heldout - 1);
    for (auto& p : positive) {
        p.id_a = p.id_b = pick_id(rng);
        p.img_a = pick_img(rng);
        do {
            p.img_b = pick_img(rng);
        } while (p.img_b == p.img_a);
    }
    for (auto& p : negative) {
        p.id_a = pick_id(rng);
        do {
            p.id_b = pick_id(rng);
        } while (p.id_b == p.id_a);
        p.img_a = pick_img(rng);
        p.img_b = pick_img(rng);
    }

    std::vector<Vec> held(n * heldout);
    detail::parallel_for(n, threads, [&](std::size_t id) {
        for (std::size_t j = 0; j < heldout; ++j) {
            held[id * heldout + j] = features(dataset.image(id, first_heldout + j).pixels);
        }
    });
    auto score = [&](const Pair& p) {
        return cosine_similarity(held[p.id_a * heldout + p.img_a], held[p.id_b * heldout + p.img_b]);
    };
    Vec pos_scores(pairs);
    Vec neg_scores(pairs);
    for (std::size_t i = 0; i < pairs; ++i) {
        pos_scores[i] = score(positive[i]);
        neg_scores[i] = score(negative[i]);
    }
    return best_threshold_accuracy(pos_scores, neg_scores);
}

GccQuality measure_gcc_quality(const SyntheticDataset& dataset, const FeatureFn& identity_features,
                               const FeatureFn& class_features, const Mat& tcc, GccStrategy strategy,
                               std::size_t k, std::size_t samples, std::uint64_t seed, double temperature) {
    if (samples == 0) {
        throw Error("measure_gcc_quality: sample count must be positive");
    }
    if (tcc.rows() != dataset.identities()) {
        throw Error("measure_gcc_quality: one TCC row per identity required");
    }
    std::mt19937_64 rng(seed);
    const SampledBatch batch = sample_batch(dataset, samples, k, rng);
    Vec cosines(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        const Vec f = identity_features(batch.identity_images.row(i));
        Mat rows(k, f.size());
        for (std::size_t j = 0; j < k; ++j) {
            rows.set_row(j, class_features(batch.class_images.row(i * k + j)));
        }
        const Vec gcc = build_gcc(strategy, f, ClassFeatureSet(std::move(rows)), temperature);
        cosines[i] = cosine_similarity(gcc, tcc.row(static_cast<std::size_t>(batch.labels[i])));
    }
    GccQuality q;
    q.samples = samples;
    for (double c : cosines) {
        q.mean_cos += c;
    }
    q.mean_cos /= static_cast<double>(samples);
    for (double c : cosines) {
        q.variance += (c - q.mean_cos) * (c - q.mean_cos);
    }
    q.variance /= static_cast<double>(samples);
    return q;
}

}  // namespace attfc
