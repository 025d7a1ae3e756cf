#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "cdacal/datagen.hpp"
#include "cdacal/model.hpp"

using namespace cdacal;

namespace {

std::vector<std::int64_t> count_labels(const std::vector<int>& labels, std::size_t n) {
    std::vector<std::int64_t> counts(n, 0);
    for (int y : labels) ++counts[static_cast<std::size_t>(y)];
    return counts;
}

}  // namespace

TEST_CASE("longtail_counts reference profiles") {
    CHECK(longtail_counts(100, 2, 100.0) == std::vector<std::int64_t>{100, 1});
    CHECK(longtail_counts(37, 5, 1.0) == std::vector<std::int64_t>(5, 37));
    CHECK(longtail_counts(1000, 10, 100.0) ==
          std::vector<std::int64_t>{1000, 599, 359, 215, 129, 77, 46, 28, 17, 10});
}

TEST_CASE("longtail_counts matches the exponential profile and is non-increasing") {
    for (std::size_t n : {2u, 3u, 10u, 100u}) {
        for (double ratio : {1.0, 10.0, 50.0, 100.0, 256.0}) {
            const auto counts = longtail_counts(5000, n, ratio);
            REQUIRE(counts.size() == n);
            for (std::size_t i = 0; i < n; ++i) {
                const double exact =
                    5000.0 * std::exp(-std::log(ratio) * static_cast<double>(i) /
                                      static_cast<double>(n - 1));
                CHECK(std::fabs(static_cast<double>(counts[i]) - exact) <= 0.5 + 1e-9);
                if (i > 0) CHECK(counts[i] <= counts[i - 1]);
            }
            // The realized ratio is off only by the rounding of the rarest class.
            CHECK(counts.front() == 5000);
            CHECK(std::fabs(static_cast<double>(counts.back()) - 5000.0 / ratio) <= 0.5);
        }
    }
}

TEST_CASE("longtail_counts rejects specs that leave a class empty") {
    try {
        (void)longtail_counts(50, 10, 100.0);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InfeasibleSpec);
    }
    CHECK_THROWS_AS((void)longtail_counts(100, 1, 10.0), Error);
    CHECK_THROWS_AS((void)longtail_counts(100, 4, 0.5), Error);
}

TEST_CASE("frequency_profile") {
    const std::vector<int> labels{0, 0, 1};
    const auto p = frequency_profile(labels, 2);
    CHECK(p.counts()[0] == 2);
    CHECK(p.counts()[1] == 1);
    CHECK(p.normalized()[0] == 1.0);
    CHECK(p.normalized()[1] == 0.5);

    const auto flat = frequency_profile(std::vector<int>{0, 1, 2, 3}, 4);
    for (double f : flat.normalized()) CHECK(f == 1.0);

    std::vector<int> lt;
    const auto counts = longtail_counts(500, 100, 100.0);
    for (std::size_t c = 0; c < counts.size(); ++c) lt.insert(lt.end(), counts[c], int(c));
    const auto profile = frequency_profile(lt, 100);
    CHECK(profile.normalized()[0] == 1.0);
    CHECK(profile.normalized()[99] == doctest::Approx(0.01).epsilon(1e-12));

    const auto absent = frequency_profile(std::vector<int>{0, 0, 2}, 3);
    CHECK(absent.normalized()[1] == 0.0);
    CHECK(absent.imbalance_ratio() == 2.0);

    try {
        (void)frequency_profile(std::vector<int>{}, 3);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyDataset);
    }
    CHECK_THROWS_AS((void)frequency_profile(std::vector<int>{0, 3}, 3), Error);
}

TEST_CASE("sample_gaussian_mixture is deterministic in its seed") {
    SyntheticSpec spec;
    spec.max_per_class = 200;
    spec.imbalance_ratio = 20.0;
    spec.seed = 42;
    const auto a = sample_gaussian_mixture(spec);
    const auto b = sample_gaussian_mixture(spec);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    CHECK(a.held_out == b.held_out);

    spec.seed = 43;
    const auto c = sample_gaussian_mixture(spec);
    CHECK_FALSE(a.features == c.features);
}

TEST_CASE("sample_gaussian_mixture follows the long-tail profile") {
    SyntheticSpec spec;
    spec.max_per_class = 1000;
    spec.imbalance_ratio = 100.0;
    spec.seed = 3;
    const auto data = sample_gaussian_mixture(spec);
    CHECK(count_labels(data.labels, 10) == longtail_counts(1000, 10, 100.0));
    CHECK(data.profile.imbalance_ratio() == doctest::Approx(100.0).epsilon(0.01));
    CHECK(data.features.cols() == spec.feature_dim);
    for (double v : data.features.data()) {
        CHECK(static_cast<double>(static_cast<float>(v)) == v);
    }
}

TEST_CASE("stratified held-out split keeps every class on both sides") {
    SyntheticSpec spec;
    spec.num_classes = 12;
    spec.max_per_class = 300;
    spec.imbalance_ratio = 150.0;
    spec.held_out_fraction = 0.2;
    spec.seed = 9;
    const auto data = sample_gaussian_mixture(spec);
    const auto train_counts = count_labels(data.train().labels, 12);
    const auto held_counts = count_labels(data.held_out_samples().labels, 12);
    const auto total = longtail_counts(300, 12, 150.0);
    for (std::size_t c = 0; c < 12; ++c) {
        CHECK(train_counts[c] + held_counts[c] == total[c]);
        if (total[c] >= 2) {
            CHECK(train_counts[c] >= 1);
            CHECK(held_counts[c] >= 1);
        } else {
            CHECK(train_counts[c] == 1);
            CHECK(held_counts[c] == 0);
        }
    }
}

TEST_CASE("balanced held-out set is drawn separately") {
    SyntheticSpec spec;
    spec.max_per_class = 400;
    spec.imbalance_ratio = 40.0;
    spec.balanced_held_out_per_class = 25;
    spec.seed = 1;
    const auto data = sample_gaussian_mixture(spec);
    CHECK(count_labels(data.train().labels, 10) == longtail_counts(400, 10, 40.0));
    CHECK(count_labels(data.held_out_samples().labels, 10) ==
          std::vector<std::int64_t>(10, 25));
    const auto tp = data.train_profile();
    CHECK(tp.counts()[0] == 400);
    CHECK(tp.counts()[9] == 10);
}

TEST_CASE("stratified_split handles singletons and fractions") {
    Samples s;
    s.num_classes = 3;
    s.labels = {0, 0, 0, 0, 1, 1, 2};
    s.features = Matrix(7, 1);
    for (std::size_t i = 0; i < 7; ++i) s.features(i, 0) = static_cast<double>(i);
    const auto [first, second] = stratified_split(s, 0.5, 4);
    CHECK(count_labels(first.labels, 3) == std::vector<std::int64_t>{2, 1, 1});
    CHECK(count_labels(second.labels, 3) == std::vector<std::int64_t>{2, 1, 0});
    CHECK(first.size() + second.size() == 7);
    CHECK_THROWS_AS((void)stratified_split(s, 1.0, 4), Error);
}

TEST_CASE("invalid specs are rejected") {
    SyntheticSpec spec;
    spec.feature_dim = 0;
    try {
        (void)sample_gaussian_mixture(spec);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidSpec);
    }
    spec = SyntheticSpec{};
    spec.class_separation = 0.0;
    CHECK_THROWS_AS((void)sample_gaussian_mixture(spec), Error);
    spec = SyntheticSpec{};
    spec.max_per_class = 10;
    CHECK_THROWS_AS((void)sample_gaussian_mixture(spec), Error);
}

TEST_CASE("balanced well-separated mixture is linearly learnable") {
    SyntheticSpec spec;
    spec.num_classes = 5;
    spec.max_per_class = 400;
    spec.imbalance_ratio = 1.0;
    spec.feature_dim = 8;
    spec.class_separation = 6.0;
    spec.seed = 21;
    const auto data = sample_gaussian_mixture(spec);
    TrainConfig cfg;
    cfg.epochs = 15;
    const auto model = train(data.train(), cfg).model;
    CHECK(accuracy(forward(model, data.held_out_samples())) > 0.95);
}
