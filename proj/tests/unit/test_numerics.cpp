#include <doctest.h>

#include <cmath>
#include <limits>

#include "attfc/numerics.hpp"
#include "support.hpp"

using namespace attfc;

TEST_CASE("softmax examples") {
    const Vec a = softmax(Vec{0.0, 0.0});
    CHECK(a[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(a[1] == doctest::Approx(0.5).epsilon(1e-15));

    const Vec b = softmax(Vec{0.9, 0.1});
    const auto oracle = testing::softmax_oracle({0.9, 0.1});
    CHECK(std::abs(b[0] - 0.6900) < 1e-4);
    CHECK(std::abs(b[1] - 0.3100) < 1e-4);
    CHECK(std::abs(b[0] - static_cast<double>(oracle[0])) < 1e-15);

    const Vec c = softmax(Vec{1.0, kMaskedLogit, 1.0});
    CHECK(c[1] == 0.0);
    CHECK(c[0] == 0.5);
    CHECK(c[2] == 0.5);
}

TEST_CASE("softmax is stable at extreme logits and rejects bad input") {
    const Vec p = softmax(Vec{1000.0, 1001.0, -1000.0});
    const auto oracle = testing::softmax_oracle({1000.0, 1001.0, -1000.0});
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(std::abs(p[i] - static_cast<double>(oracle[i])) < 1e-15);
    }
    CHECK_THROWS_AS(softmax(Vec{}), Error);
    CHECK_THROWS_AS(softmax(Vec{kMaskedLogit, kMaskedLogit}), Error);
    CHECK_THROWS_AS(softmax(Vec{1.0, std::nan("")}), NumericalError);
    CHECK_THROWS_AS(softmax(Vec{1.0, std::numeric_limits<double>::infinity()}), NumericalError);
}

TEST_CASE("softmax sums to one on random logits") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal(0.0, 30.0);
    for (int t = 0; t < 200; ++t) {
        Vec z(1 + t % 40);
        for (double& v : z) {
            v = normal(rng);
        }
        double total = 0.0;
        for (double v : softmax(z)) {
            CHECK(v >= 0.0);
            total += v;
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);
    }
}

TEST_CASE("log_sum_exp matches direct evaluation") {
    const Vec z{0.3, -1.2, 2.5};
    const double direct = std::log(std::exp(0.3) + std::exp(-1.2) + std::exp(2.5));
    CHECK(log_sum_exp(z) == doctest::Approx(direct).epsilon(1e-14));
    CHECK(log_sum_exp(Vec{1.0, kMaskedLogit}) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("cosine similarity examples") {
    std::mt19937_64 rng(2);
    const Vec u = testing::random_unit(7, rng);
    CHECK(cosine_similarity(u, u) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine_similarity(Vec{1, 0}, Vec{0, 1}) == 0.0);
    CHECK(std::abs(cosine_similarity(Vec{1, 1}, Vec{1, 0}) - 0.70711) < 1e-5);
    CHECK(cosine_similarity(Vec{1e-3, 1.0}, Vec{2e-3, 2.0}) <= 1.0);
    CHECK_THROWS_AS(cosine_similarity(Vec{0, 0}, Vec{1, 0}), Error);
    CHECK_THROWS_AS(cosine_similarity(Vec{1, 0}, Vec{1, 0, 0}), Error);
}

TEST_CASE("l2_normalize examples") {
    const Vec a = l2_normalize(Vec{3, 4});
    CHECK(a[0] == doctest::Approx(0.6));
    CHECK(a[1] == doctest::Approx(0.8));
    CHECK(l2_normalize(Vec{2, 0, 0}) == Vec{1, 0, 0});
    std::mt19937_64 rng(5);
    const Vec u = testing::random_unit(9, rng);
    CHECK(testing::max_abs_diff(l2_normalize(u), u) < 1e-15);
    CHECK_THROWS_AS(l2_normalize(Vec{0, 0}), Error);
    CHECK(is_unit(u));
    CHECK_FALSE(is_unit(Vec{1.1, 0}));
}

TEST_CASE("finite differences") {
    const Vec g = finite_diff_grad([](std::span<const double> x) { return x[0] * x[0]; }, Vec{3.0});
    CHECK(std::abs(g[0] - 6.0) < 1e-6);

    const Vec zero = finite_diff_grad([](std::span<const double>) { return 4.2; }, Vec{1.0, -2.0});
    CHECK(zero == Vec{0.0, 0.0});

    // softmax cross entropy: gradient p - onehot
    std::mt19937_64 rng(9);
    std::normal_distribution<double> normal(0.0, 2.0);
    for (int t = 0; t < 20; ++t) {
        Vec z(6);
        for (double& v : z) {
            v = normal(rng);
        }
        const std::size_t target = static_cast<std::size_t>(t) % z.size();
        const Vec numeric = finite_diff_grad(
            [&](std::span<const double> x) { return log_sum_exp(x) - x[target]; }, z);
        const auto p = testing::softmax_oracle(z);
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double expected = static_cast<double>(p[i]) - (i == target ? 1.0 : 0.0);
            CHECK(std::abs(numeric[i] - expected) < 1e-6);
        }
    }
}

TEST_CASE("relative_error") {
    CHECK(relative_error(Vec{1, 2}, Vec{1, 2}) == 0.0);
    CHECK(relative_error(Vec{3, 4}, Vec{0, 0}) == doctest::Approx(1.0));
    CHECK(relative_error(Vec{0, 0}, Vec{0, 0}) == 0.0);
    CHECK(relative_error(Vec{1e-12}, Vec{0}) == doctest::Approx(1e-4));
    CHECK_THROWS_AS(relative_error(Vec{1}, Vec{1, 2}), Error);
}

TEST_CASE("Mat rows") {
    Mat m(2, 3);
    m.set_row(1, Vec{1, 2, 3});
    CHECK(m(1, 2) == 3.0);
    CHECK(m.row(0)[0] == 0.0);
    CHECK_THROWS_AS(m.set_row(0, Vec{1, 2}), Error);
}
