#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"

#include "cdacal/calibrate.hpp"
#include "cdacal/core.hpp"
#include "cdacal/rng.hpp"
#include "oracles.hpp"

using namespace cdacal;

namespace {

LogitSet random_logits(Rng& rng, std::size_t m, std::size_t n, double scale) {
    Matrix z(m, n);
    std::vector<int> labels(m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t c = 0; c < n; ++c) z(i, c) = scale * rng.normal();
        labels[i] = static_cast<int>(rng.below(n));
    }
    return LogitSet(std::move(z), std::move(labels));
}

}  // namespace

TEST_CASE("softmax of equal logits is uniform") {
    const std::vector<double> z{0.0, 0.0, 0.0};
    const auto p = softmax(z, TemperatureVector::uniform(3, 1.0));
    for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("softmax is shift invariant") {
    const std::vector<double> a{1.0, 2.0, 3.0};
    const std::vector<double> b{101.0, 102.0, 103.0};
    const auto t = TemperatureVector::uniform(3, 1.0);
    const auto pa = softmax(a, t);
    const auto pb = softmax(b, t);
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::fabs(pa[c] - pb[c]) < 1e-12);
}

TEST_CASE("per-class temperature divides each column before softmax") {
    // [2, 0] at T=2 is softmax([1, 0]); [2, 2] at T=[1, 2] is softmax([2, 1]).
    const double s1 = 1.0 / (1.0 + std::exp(-1.0));
    auto p = softmax(std::vector<double>{2.0, 0.0}, TemperatureVector::uniform(2, 2.0));
    CHECK(p[0] == doctest::Approx(s1).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(1.0 - s1).epsilon(1e-15));
    CHECK(p[0] == doctest::Approx(0.7311).epsilon(1e-4));

    p = softmax(std::vector<double>{2.0, 2.0}, TemperatureVector({1.0, 2.0}));
    CHECK(p[0] == doctest::Approx(0.7311).epsilon(1e-4));
    CHECK(p[1] == doctest::Approx(0.2689).epsilon(1e-4));
}

TEST_CASE("softmax rejects bad temperatures and NaN logits") {
    CHECK_THROWS_AS(TemperatureVector({1.0, 0.0}), Error);
    CHECK_THROWS_AS(TemperatureVector({1.0, -2.0}), Error);
    try {
        TemperatureVector({0.0, 1.0});
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidTemperature);
    }
    std::vector<double> out(2);
    const std::vector<double> z{std::numeric_limits<double>::quiet_NaN(), 0.0};
    try {
        softmax_into(z, TemperatureVector::uniform(2, 1.0), out);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidInput);
    }
}

TEST_CASE("softmax rows sum to one and stay in range for large logits") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.below(20);
        std::vector<double> z(n), t(n);
        for (std::size_t c = 0; c < n; ++c) {
            z[c] = 1e3 * (2.0 * rng.uniform() - 1.0);
            t[c] = 0.05 + 10.0 * rng.uniform();
        }
        const auto p = softmax(z, TemperatureVector(t));
        double sum = 0.0;
        for (double v : p) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            CHECK(std::isfinite(v));
            sum += v;
        }
        CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("nll reference values") {
    SUBCASE("perfect prediction has zero loss") {
        const LogitSet s(Matrix(1, 2, std::vector<double>{0.0, -1000.0}), {0});
        CHECK(nll(s, TemperatureVector::uniform(2, 1.0)) == 0.0);
    }
    SUBCASE("uniform prediction costs log N") {
        const LogitSet s(Matrix(3, 5, 0.0), {0, 2, 4});
        CHECK(nll(s, TemperatureVector::uniform(5, 1.0)) ==
              doctest::Approx(std::log(5.0)).epsilon(1e-15));
    }
    SUBCASE("two-sample hand computation") {
        const LogitSet s(Matrix(2, 2, std::vector<double>{1.0, 0.0, 0.0, 2.0}), {0, 0});
        const double expected =
            0.5 * (std::log(1.0 + std::exp(-1.0)) + std::log(1.0 + std::exp(2.0)));
        CHECK(std::fabs(nll(s, TemperatureVector::uniform(2, 1.0)) - expected) < 1e-14);
        const oracle::Rows rows{{1.0, 0.0}, {0.0, 2.0}};
        CHECK(std::fabs(nll(s, TemperatureVector::uniform(2, 1.5)) -
                        oracle::mean_nll(rows, {0, 0}, 1.5)) < 1e-14);
    }
}

TEST_CASE("nll is non-increasing in the true-class logit") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.below(8);
        std::vector<double> z(n);
        for (auto& v : z) v = 3.0 * rng.normal();
        const int y = static_cast<int>(rng.below(n));
        double previous = std::numeric_limits<double>::infinity();
        for (int step = 0; step < 20; ++step) {
            const LogitSet s(Matrix(1, n, z), {y});
            const double loss = nll(s, TemperatureVector::uniform(n, 1.0));
            CHECK(loss <= previous);
            CHECK(loss >= 0.0);
            previous = loss;
            z[static_cast<std::size_t>(y)] += 0.5;
        }
    }
}

TEST_CASE("accuracy reference values") {
    SUBCASE("all correct and never correct") {
        const Matrix m(2, 2, std::vector<double>{1.0, 0.0, 0.0, 1.0});
        CHECK(accuracy(m, std::vector<int>{0, 1}) == 1.0);
        CHECK(accuracy(m, std::vector<int>{1, 0}) == 0.0);
    }
    SUBCASE("ties go to the lowest index") {
        const Matrix m(4, 2, std::vector<double>{1.0, 1.0, 0.0, 2.0, 3.0, 1.0, 0.5, 0.5});
        CHECK(accuracy(m, std::vector<int>{0, 1, 0, 1}) == 0.75);
    }
    SUBCASE("empty set is undefined") {
        try {
            (void)accuracy(Matrix(0, 2), std::vector<int>{});
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::UndefinedMetric);
        }
    }
}

TEST_CASE("scalar temperature never changes accuracy") {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        const auto logits = random_logits(rng, 50, 2 + rng.below(9), 4.0);
        const double before = accuracy(logits);
        for (double t : {0.05, 0.3, 1.0, 2.5, 10.0}) {
            const auto probs =
                apply_temperature(logits, TemperatureVector::uniform(logits.num_classes(), t));
            CHECK(accuracy(probs) == before);
        }
    }
}

TEST_CASE("LogitSet and ProbSet validate their inputs") {
    CHECK_THROWS_AS(LogitSet(Matrix(2, 1, 0.0), {0, 0}), Error);
    CHECK_THROWS_AS(LogitSet(Matrix(0, 2), {}), Error);
    CHECK_THROWS_AS(LogitSet(Matrix(1, 2, 0.0), {2}), Error);
    CHECK_THROWS_AS(LogitSet(Matrix(1, 2, 0.0), {0, 1}), Error);
    CHECK_THROWS_AS(
        LogitSet(Matrix(1, 2, std::vector<double>{std::numeric_limits<double>::infinity(), 0.0}),
                 {0}),
        Error);
    CHECK_THROWS_AS(ProbSet(Matrix(1, 2, std::vector<double>{0.7, 0.7}), {0}), Error);
    CHECK_THROWS_AS(ProbSet(Matrix(1, 2, std::vector<double>{1.2, -0.2}), {0}), Error);
    CHECK_NOTHROW(ProbSet(Matrix(1, 2, std::vector<double>{0.25, 0.75}), {1}));
}

TEST_CASE("ClassFrequencyProfile normalizes by the largest count") {
    const ClassFrequencyProfile p({200, 50, 0, 2});
    CHECK(p.normalized()[0] == 1.0);
    CHECK(p.normalized()[1] == 0.25);
    CHECK(p.normalized()[2] == 0.0);
    CHECK(p.normalized()[3] == 0.01);
    CHECK(p.imbalance_ratio() == 100.0);
    CHECK_THROWS_AS(ClassFrequencyProfile({0, 0}), Error);
}

TEST_CASE("error kinds map to exit codes") {
    CHECK(exit_code_for(ErrorKind::Usage) == 1);
    CHECK(exit_code_for(ErrorKind::Parse) == 2);
    CHECK(exit_code_for(ErrorKind::InvalidInput) == 2);
    CHECK(exit_code_for(ErrorKind::FitFailure) == 3);
    CHECK(exit_code_for(ErrorKind::TrainingDiverged) == 3);
}
