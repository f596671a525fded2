#include <doctest.h>

#include <cmath>
#include <map>

#include "attfc/evaluation.hpp"
#include "support.hpp"

using namespace attfc;

TEST_CASE("best threshold accuracy") {
    CHECK(best_threshold_accuracy(Vec{0.9, 0.8}, Vec{0.1, 0.2}) == 1.0);
    CHECK(best_threshold_accuracy(Vec{0.1, 0.2}, Vec{0.9, 0.8}) == 0.5);
    CHECK(best_threshold_accuracy(Vec{0.5, 0.5}, Vec{0.5, 0.5}) == 0.5);
    CHECK(best_threshold_accuracy(Vec{0.9, 0.3}, Vec{0.5, 0.1}) == 0.75);
    CHECK_THROWS_AS(best_threshold_accuracy(Vec{}, Vec{}), Error);
}

TEST_CASE("an anchor oracle verifies perfectly") {
    SyntheticDatasetSpec spec;
    spec.identities = 50;
    spec.input_dim = 16;
    const auto ds = make_dataset(spec);
    // knows which identity every image belongs to
    std::map<std::vector<double>, std::size_t> owner;
    for (std::size_t id = 0; id < ds.identities(); ++id) {
        for (std::size_t j = 0; j < ds.images_per_identity(); ++j) {
            const auto px = ds.image(id, j).pixels;
            owner[Vec(px.begin(), px.end())] = id;
        }
    }
    const FeatureFn oracle = [&](std::span<const double> x) {
        const auto a = ds.anchor(owner.at(Vec(x.begin(), x.end())));
        return Vec(a.begin(), a.end());
    };
    std::mt19937_64 rng(1);
    CHECK(evaluate_verification(oracle, ds, 300, rng) == 1.0);
}

TEST_CASE("random features sit at chance") {
    SyntheticDatasetSpec spec;
    spec.identities = 500;
    spec.input_dim = 16;
    const auto ds = make_dataset(spec);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::mt19937_64 feature_rng(100 + seed);
        const FeatureFn random = [&](std::span<const double>) { return testing::random_unit(16, feature_rng); };
        std::mt19937_64 rng(seed);
        const double acc = evaluate_verification(random, ds, 1000, rng);
        CHECK(std::abs(acc - 0.5) <= 0.05);
    }
}

TEST_CASE("evaluation is independent of the thread count") {
    SyntheticDatasetSpec spec;
    spec.identities = 40;
    spec.input_dim = 8;
    const auto ds = make_dataset(spec);
    std::mt19937_64 init(3);
    const EncoderParams enc = EncoderParams::random({8, 6, 4}, init);
    std::mt19937_64 a(9);
    std::mt19937_64 b(9);
    CHECK(evaluate_verification(encoder_features(enc), ds, 500, a, 1) ==
          evaluate_verification(encoder_features(enc), ds, 500, b, 4));
}

TEST_CASE("held-out images are required") {
    SyntheticDatasetSpec spec;
    spec.identities = 10;
    spec.input_dim = 4;
    spec.heldout_per_identity = 1;
    const auto ds = make_dataset(spec);
    std::mt19937_64 rng(0);
    CHECK_THROWS_AS(evaluate_verification(encoder_features(EncoderParams::zeros({4, 2})), ds, 10, rng), Error);
}
