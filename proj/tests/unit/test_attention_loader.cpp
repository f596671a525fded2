#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "attfc/attention_loader.hpp"
#include "support.hpp"

using namespace attfc;

namespace {

ClassFeatureSet set_of(std::initializer_list<Vec> rows) {
    Mat m(rows.size(), rows.begin()->size());
    std::size_t r = 0;
    for (const Vec& v : rows) {
        m.set_row(r++, v);
    }
    return ClassFeatureSet(std::move(m));
}

}  // namespace

TEST_CASE("attention weight examples") {
    const Vec f{1, 0, 0};
    CHECK(attention_weights(f, set_of({Vec{0, 1, 0}})).alpha == Vec{1.0});

    const auto uniform = attention_weights(f, set_of({Vec{0, 1, 0}, Vec{0, 1, 0}, Vec{0, 1, 0}}));
    for (double a : uniform.alpha) {
        CHECK(a == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }

    // rows with cosines 0.9 and 0.1 against f
    const Vec k1{0.9, std::sqrt(1 - 0.81), 0};
    const Vec k2{0.1, 0, std::sqrt(1 - 0.01)};
    const auto w = attention_weights(f, set_of({k1, k2}));
    const auto oracle = testing::softmax_oracle({0.9, 0.1});
    CHECK(std::abs(w.alpha[0] - 0.6900) < 1e-4);
    CHECK(std::abs(w.alpha[1] - 0.3100) < 1e-4);
    CHECK(std::abs(w.alpha[0] - static_cast<double>(oracle[0])) < 1e-14);
}

TEST_CASE("generate_gcc examples") {
    const ClassFeatureSet one = set_of({Vec{0, 0, 1}});
    CHECK(generate_gcc(one, AttentionWeights{{1.0}}) == Vec{0, 0, 1});

    const ClassFeatureSet same = set_of({Vec{0.6, 0.8}, Vec{0.6, 0.8}});
    CHECK(testing::max_abs_diff(generate_gcc(same, AttentionWeights{{0.3, 0.7}}), Vec{0.6, 0.8}) < 1e-15);

    const ClassFeatureSet ortho = set_of({Vec{1, 0}, Vec{0, 1}});
    const Vec g = generate_gcc(ortho, AttentionWeights{{0.69, 0.31}});
    const double n = std::hypot(0.69, 0.31);
    CHECK(std::abs(g[0] - 0.9122) < 1e-3);
    CHECK(std::abs(g[1] - 0.4098) < 1e-3);
    CHECK(std::abs(g[0] - 0.69 / n) < 1e-15);

    CHECK_THROWS_WITH_AS(generate_gcc(set_of({Vec{1, 0}, Vec{-1, 0}}), AttentionWeights{{0.5, 0.5}}),
                         doctest::Contains("degenerate GCC"), Error);
    CHECK_THROWS_AS(generate_gcc(ortho, AttentionWeights{{0.5, 0.6}}), Error);
    CHECK_THROWS_AS(generate_gcc(ortho, AttentionWeights{{1.0}}), Error);
}

TEST_CASE("constant and single image strategies") {
    const Vec c = constant_weight_gcc(set_of({Vec{1, 0}, Vec{0, 1}}));
    CHECK(std::abs(c[0] - std::sqrt(0.5)) < 1e-15);
    CHECK(std::abs(c[1] - std::sqrt(0.5)) < 1e-15);
    CHECK(constant_weight_gcc(set_of({Vec{0, 1}})) == Vec{0, 1});

    const ClassFeatureSet k = set_of({Vec{0, 0, 1}, Vec{1, 0, 0}});
    CHECK(single_image_gcc(k) == Vec{0, 0, 1});
    const ClassFeatureSet solo = set_of({Vec{0.6, 0.8}});
    CHECK(single_image_gcc(solo) == generate_gcc(solo, AttentionWeights{{1.0}}));
}

TEST_CASE("attention properties on random instances") {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 100; ++t) {
        const std::size_t k = 2 + static_cast<std::size_t>(t) % 4;
        const Vec f = testing::random_unit(5, rng);
        const Mat rows = testing::random_mat(k, 5, rng);
        const auto alpha = attention_weights(f, ClassFeatureSet(rows)).alpha;

        // permutation equivariance
        std::vector<std::size_t> perm(k);
        for (std::size_t i = 0; i < k; ++i) {
            perm[i] = (i + 1) % k;
        }
        Mat permuted(k, 5);
        for (std::size_t i = 0; i < k; ++i) {
            permuted.set_row(i, rows.row(perm[i]));
        }
        const auto alpha_p = attention_weights(f, ClassFeatureSet(permuted)).alpha;
        for (std::size_t i = 0; i < k; ++i) {
            CHECK(std::abs(alpha_p[i] - alpha[perm[i]]) < 1e-15);
        }

        // monotone in similarity
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                if (cosine_similarity(f, rows.row(j)) > cosine_similarity(f, rows.row(i))) {
                    CHECK(alpha[j] > alpha[i]);
                }
            }
        }

        // GCC lies along the weighted sum
        Vec sum(5, 0.0);
        for (std::size_t i = 0; i < k; ++i) {
            axpy(alpha[i], rows.row(i), sum);
        }
        const Vec gcc = generate_gcc(ClassFeatureSet(rows), AttentionWeights{alpha});
        CHECK(std::abs(cosine_similarity(gcc, sum) - 1.0) <= 1e-12);
    }
}

TEST_CASE("class feature rows must be unit") {
    CHECK_THROWS_AS(ClassFeatureSet(Mat(0, 3)), Error);
    CHECK_THROWS_AS(set_of({Vec{2, 0}}), Error);
    CHECK(gcc_strategy_from_string("constant") == GccStrategy::constant);
    CHECK_THROWS_AS(gcc_strategy_from_string("median"), Error);
}
