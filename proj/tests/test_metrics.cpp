#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dpe/metrics.hpp"
#include "dpe/rng.hpp"

using namespace dpe;

TEST_CASE("confusion extraction") {
    auto truth = Tensor<float>::from_values(Shape({1, 1, 2, 2}), {1, 0, 1, 0});

    // perfect prediction
    auto exact = Tensor<float>::from_values(Shape({1, 1, 2, 2}), {0.9f, 0.1f, 0.8f, 0.2f});
    auto c = confusion_from_masks(exact, truth, 0.5).front();
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);
    CHECK(c.tp == 2);
    CHECK(c.tn == 2);
    CHECK(c.total() == 4);

    // total disagreement
    auto inverted = Tensor<float>::from_values(Shape({1, 1, 2, 2}), {0.1f, 0.9f, 0.2f, 0.8f});
    c = confusion_from_masks(inverted, truth, 0.5).front();
    CHECK(c.tp == 0);
    CHECK(c.tn == 0);
    CHECK(c.fp == 2);
    CHECK(c.fn == 2);

    // hand enumeration: pred = [1,1,0,0], truth = [1,0,1,0]
    auto pred = Tensor<float>::from_values(Shape({1, 1, 2, 2}), {1.0f, 1.0f, 0.0f, 0.0f});
    c = confusion_from_masks(pred, truth, 0.5).front();
    CHECK(c.tp == 1);
    CHECK(c.fp == 1);
    CHECK(c.fn == 1);
    CHECK(c.tn == 1);

    // per-image separation
    auto probs2 = Tensor<float>::from_values(Shape({2, 1, 1, 2}), {0.9f, 0.9f, 0.1f, 0.1f});
    auto truth2 = Tensor<float>::from_values(Shape({2, 1, 1, 2}), {1, 1, 1, 1});
    auto per_image = confusion_from_masks(probs2, truth2, 0.5);
    REQUIRE(per_image.size() == 2);
    CHECK(per_image[0].tp == 2);
    CHECK(per_image[1].fn == 2);

    CHECK_THROWS_AS(confusion_from_masks(exact, Tensor<float>::ones(Shape({1, 1, 1, 2})), 0.5),
                    Error);
    auto gray = Tensor<float>::from_values(Shape({1, 1, 2, 2}), {0.5f, 0, 1, 0});
    CHECK_THROWS_AS(confusion_from_masks(exact, gray, 0.5), Error);
    CHECK_THROWS_AS(confusion_from_masks(exact, truth, 1.5), Error);
}

TEST_CASE("dice hand values") {
    CHECK(dice({50, 10, 10, 100}) == doctest::Approx(100.0 / 120.0).epsilon(1e-9));
    CHECK(dice({42, 0, 0, 10}) == 1.0);
    CHECK(dice({0, 0, 0, 16}) == 1.0);  // both masks empty, by convention
}

TEST_CASE("iou hand values and the dice relation") {
    CHECK(iou({50, 10, 10, 100}) == doctest::Approx(50.0 / 70.0).epsilon(1e-9));
    CHECK(iou({0, 3, 4, 100}) == 0.0);  // disjoint non-empty masks
    CHECK(iou({0, 0, 0, 5}) == 1.0);

    SeededRng rng(2025);
    for (int trial = 0; trial < 1000; ++trial) {
        ConfusionCounts c;
        c.tp = static_cast<int64_t>(rng.uniform_index(1000000));
        c.fp = static_cast<int64_t>(rng.uniform_index(1000000));
        c.fn = static_cast<int64_t>(rng.uniform_index(1000000));
        c.tn = static_cast<int64_t>(rng.uniform_index(1000000));
        const double d = dice(c), j = iou(c);
        CHECK(std::abs(d - 2.0 * j / (1.0 + j)) < 1e-12);
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
        CHECK(j >= 0.0);
        CHECK(j <= 1.0);
        CHECK(j <= d + 1e-15);
        if (j != 0.0 && j != 1.0) CHECK(j < d);

        // swapping fp and fn changes neither measure
        ConfusionCounts swapped{c.tp, c.fn, c.fp, c.tn};
        CHECK(dice(swapped) == d);
        CHECK(iou(swapped) == j);
    }
}

TEST_CASE("pixel accuracy") {
    CHECK(pixel_accuracy({10, 0, 0, 90}) == 1.0);
    CHECK(pixel_accuracy({1, 1, 1, 1}) == 0.5);
    CHECK(pixel_accuracy({0, 0, 0, 64}) == 1.0);  // all-background agreement
    CHECK_THROWS_AS(pixel_accuracy({0, 0, 0, 0}), Error);
}

TEST_CASE("aggregate_mean") {
    CHECK(aggregate_mean({1.0}) == 1.0);
    CHECK(aggregate_mean({0.8, 0.9}) == doctest::Approx(0.85).epsilon(1e-12));
    CHECK_THROWS_AS(aggregate_mean({}), Error);

    SeededRng rng(7);
    std::vector<double> values;
    for (int i = 0; i < 50; ++i) values.push_back(rng.uniform());
    std::vector<double> shuffled = values;
    for (size_t i = shuffled.size() - 1; i > 0; --i) {
        std::swap(shuffled[i], shuffled[static_cast<size_t>(rng.uniform_index(i + 1))]);
    }
    CHECK(aggregate_mean(values) == doctest::Approx(aggregate_mean(shuffled)).epsilon(1e-12));
}
