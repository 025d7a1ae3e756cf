#include <cmath>
#include <vector>

#include "doctest.h"

#include "cdacal/datagen.hpp"
#include "cdacal/model.hpp"
#include "cdacal/rng.hpp"
#include "cdacal/smooth.hpp"
#include "oracles.hpp"

using namespace cdacal;

namespace {

Samples random_samples(std::uint64_t seed, std::size_t m, std::size_t dim, std::size_t n) {
    Rng rng(seed);
    Samples s;
    s.num_classes = n;
    s.features = Matrix(m, dim);
    for (auto& v : s.features.data()) v = rng.normal();
    for (std::size_t i = 0; i < m; ++i) s.labels.push_back(static_cast<int>(i % n));
    return s;
}

Samples small_mixture(std::uint64_t seed, double ratio = 10.0) {
    SyntheticSpec spec;
    spec.num_classes = 4;
    spec.max_per_class = 200;
    spec.imbalance_ratio = ratio;
    spec.feature_dim = 5;
    spec.class_separation = 3.0;
    spec.seed = seed;
    return sample_gaussian_mixture(spec).train();
}

// Mean loss over `data` for a model with parameters `params`, per a row objective on logits.
template <typename Loss>
double mean_loss(LinearModel model, const std::vector<double>& params, const Samples& data,
                 Loss&& loss) {
    std::copy(params.begin(), params.end(), model.params().begin());
    const Matrix logits = forward(model, data.features);
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) total += loss(i, logits.row(i));
    return total / static_cast<double>(data.size());
}

template <typename Grad>
std::vector<double> mean_grad(const LinearModel& model, const Samples& data, Grad&& dlogits_of) {
    std::vector<double> grad(model.parameter_count(), 0.0);
    std::vector<double> hidden(model.hidden_width()), scratch(model.hidden_width());
    std::vector<double> logits(model.num_classes()), dlogits(model.num_classes());
    for (std::size_t i = 0; i < data.size(); ++i) {
        model.forward_row(data.features.row(i), hidden, logits);
        dlogits_of(i, logits, dlogits);
        model.backward_row(data.features.row(i), hidden, dlogits, grad, scratch);
    }
    for (auto& g : grad) g /= static_cast<double>(data.size());
    return grad;
}

}  // namespace

TEST_CASE("forward pass of a hand-set model") {
    LinearModel zero(3, 2);
    const Matrix x(2, 3, std::vector<double>{1.0, 2.0, 3.0, -1.0, 0.0, 4.0});
    const Matrix z0 = forward(zero, x);
    for (double v : z0.data()) CHECK(v == 0.0);

    LinearModel m(2, 2);
    // W = [[1, 2], [3, 4]], b = [0.5, -0.5]
    const std::vector<double> p{1.0, 2.0, 3.0, 4.0, 0.5, -0.5};
    std::copy(p.begin(), p.end(), m.params().begin());
    const Matrix z = forward(m, Matrix(1, 2, std::vector<double>{1.0, -1.0}));
    CHECK(z(0, 0) == -0.5);
    CHECK(z(0, 1) == -1.5);
    CHECK_THROWS_AS((void)forward(m, Matrix(1, 3, 0.0)), Error);
}

TEST_CASE("forward is row independent") {
    const auto data = random_samples(1, 30, 4, 3);
    TrainConfig cfg;
    cfg.init_scale = 1.0;
    const auto model = initialize_model(4, 3, cfg);
    const Matrix all = forward(model, data.features);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Matrix one = forward(model, Matrix(1, 4, std::vector<double>(
                                                           data.features.row(i).begin(),
                                                           data.features.row(i).end())));
        for (std::size_t c = 0; c < 3; ++c) CHECK(one(0, c) == all(i, c));
    }
}

TEST_CASE("parameter layout marks weights and biases") {
    const LinearModel linear(3, 2);
    CHECK(linear.parameter_count() == 8);
    CHECK(linear.is_weight(0));
    CHECK(linear.is_weight(5));
    CHECK_FALSE(linear.is_weight(6));
    const LinearModel deep(3, 2, 4);
    CHECK(deep.parameter_count() == 4 * 3 + 4 + 2 * 4 + 2);
    CHECK(deep.is_weight(11));
    CHECK_FALSE(deep.is_weight(12));
    CHECK(deep.is_weight(16));
    CHECK_FALSE(deep.is_weight(24));
}

TEST_CASE("training on separable data drives the loss down") {
    Samples s;
    s.num_classes = 2;
    s.features = Matrix(40, 2);
    for (std::size_t i = 0; i < 40; ++i) {
        const double side = i % 2 == 0 ? 1.0 : -1.0;
        s.features(i, 0) = side * (1.0 + 0.05 * static_cast<double>(i));
        s.features(i, 1) = 0.1 * static_cast<double>(i % 7);
        s.labels.push_back(i % 2 == 0 ? 0 : 1);
    }
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 8;
    const auto result = train(s, cfg);
    REQUIRE(result.trace.size() == 20);
    for (std::size_t e = 1; e < 10; ++e) {
        CHECK(result.trace[e].train_loss < result.trace[e - 1].train_loss);
    }
    CHECK(accuracy(forward(result.model, s)) == 1.0);
}

TEST_CASE("zero learning rate leaves the initial parameters") {
    const auto data = random_samples(2, 50, 3, 3);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 3;
    cfg.seed = 5;
    const auto result = train(data, cfg);
    CHECK(result.model == initialize_model(3, 3, cfg));
}

TEST_CASE("training is deterministic in its seed") {
    const auto data = small_mixture(3);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = 9;
    CHECK(train(data, cfg).model == train(data, cfg).model);
    TrainConfig other = cfg;
    other.seed = 10;
    CHECK_FALSE(train(data, cfg).model == train(data, other).model);
}

TEST_CASE("validation stats are recorded per epoch") {
    const auto data = small_mixture(4);
    TrainConfig cfg;
    cfg.epochs = 4;
    const auto result = train(data, cfg, &data);
    REQUIRE(result.trace.size() == 4);
    for (const auto& e : result.trace) {
        REQUIRE(e.val_acc.has_value());
        REQUIRE(e.val_ece.has_value());
        CHECK(*e.val_acc > 0.25);
    }
}

TEST_CASE("a runaway learning rate is reported as divergence") {
    // Feature magnitudes near the top of the double range overflow the logits.
    auto data = small_mixture(5);
    for (auto& v : data.features.data()) v *= 1e300;
    TrainConfig cfg;
    cfg.learning_rate = 10.0;
    cfg.epochs = 5;
    try {
        (void)train(data, cfg);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::TrainingDiverged);
    }
}

TEST_CASE("the hidden-layer variant trains") {
    const auto data = small_mixture(6, 1.0);
    TrainConfig cfg;
    cfg.hidden_width = 8;
    cfg.epochs = 10;
    const auto result = train(data, cfg);
    CHECK(result.trace.back().train_loss < result.trace.front().train_loss);
    CHECK(accuracy(forward(result.model, data)) > 0.8);
}

TEST_CASE("kd_loss reference values") {
    const std::vector<double> a{1.0, -0.5, 2.0};
    CHECK(kd_loss(a, a, TemperatureVector::uniform(3, 4.0)) == 0.0);
    CHECK(kd_loss(a, a, TemperatureVector({1.0, 2.0, 4.0})) == 0.0);

    const std::vector<double> b{0.0, 1.0, -1.0};
    for (const auto& t : {std::vector<double>{2.0, 2.0, 2.0}, std::vector<double>{1.0, 2.0, 4.0}}) {
        const auto pt = oracle::softmax(a, t);
        const auto ps = oracle::softmax(b, t);
        double expected = 0.0;
        for (std::size_t c = 0; c < 3; ++c) expected += pt[c] * std::log(pt[c] / ps[c]);
        CHECK(std::fabs(kd_loss(a, b, TemperatureVector(t)) - expected) < 1e-14);
    }
}

TEST_CASE("kd_loss is non-negative and vanishes only for equal distributions") {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(8);
        std::vector<double> t(n), s(n), temps(n);
        for (std::size_t c = 0; c < n; ++c) {
            t[c] = 3.0 * rng.normal();
            s[c] = 3.0 * rng.normal();
            temps[c] = 0.5 + 4.0 * rng.uniform();
        }
        CHECK(kd_loss(t, s, TemperatureVector(temps)) > 0.0);
        CHECK(kd_loss(t, t, TemperatureVector(temps)) == 0.0);
    }
}

TEST_CASE("kd_grad matches finite differences") {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.below(7);
        std::vector<double> t(n), s(n), temps(n);
        for (std::size_t c = 0; c < n; ++c) {
            t[c] = 2.0 * rng.normal();
            s[c] = 2.0 * rng.normal();
            temps[c] = 0.5 + 4.0 * rng.uniform();
        }
        const TemperatureVector tv(temps);
        std::vector<double> g(n);
        kd_grad(t, s, tv, g);
        const auto numeric = oracle::numeric_gradient(
            [&](const std::vector<double>& x) { return kd_loss(t, x, tv); }, s);
        CHECK(oracle::relative_error(g, numeric) < 1e-6);
    }
}

TEST_CASE("parameter gradients match finite differences") {
    const auto data = random_samples(8, 12, 3, 4);
    const SmoothingVector smoothing({0.1, 0.05, 0.2, 0.0});
    const auto targets = soft_labels(data.labels, smoothing, 4);
    const auto unit = TemperatureVector::uniform(4, 1.0);
    for (std::size_t hidden : {0u, 5u}) {
        CAPTURE(hidden);
        TrainConfig cfg;
        cfg.hidden_width = hidden;
        cfg.init_scale = 0.5;
        cfg.seed = 3;
        auto model = initialize_model(3, 4, cfg);
        Rng rng(hidden + 1);
        for (auto& p : model.params()) p += 0.1 * rng.normal();
        const std::vector<double> params(model.params().begin(), model.params().end());

        const auto ce_loss = [&](std::size_t i, std::span<const double> z) {
            return soft_ce_loss(softmax(z, unit), targets.values.row(i));
        };
        const auto ce_dlogits = [&](std::size_t i, std::span<const double> z,
                                    std::span<double> out) {
            soft_ce_grad(softmax(z, unit), targets.values.row(i), out);
        };
        const auto numeric = oracle::numeric_gradient(
            [&](const std::vector<double>& p) { return mean_loss(model, p, data, ce_loss); },
            params);
        CHECK(oracle::relative_error(mean_grad(model, data, ce_dlogits), numeric) < 1e-6);

        const TemperatureVector temps({1.0, 2.0, 3.0, 4.0});
        const Matrix teacher = forward(model, data.features);
        auto student = model;
        for (auto& p : student.params()) p += 0.2 * rng.normal();
        const std::vector<double> sp(student.params().begin(), student.params().end());
        const auto kd = [&](std::size_t i, std::span<const double> z) {
            return kd_loss(teacher.row(i), z, temps);
        };
        const auto kd_dlogits = [&](std::size_t i, std::span<const double> z,
                                    std::span<double> out) { kd_grad(teacher.row(i), z, temps, out); };
        const auto kd_numeric = oracle::numeric_gradient(
            [&](const std::vector<double>& p) { return mean_loss(student, p, data, kd); }, sp);
        CHECK(oracle::relative_error(mean_grad(student, data, kd_dlogits), kd_numeric) < 1e-6);
    }
}

TEST_CASE("loss reduction chain") {
    const auto data = small_mixture(10);
    TrainConfig ce;
    ce.epochs = 3;
    TrainConfig ls = ce;
    ls.loss = LossMode{LossKind::LS, 0.0, 0.0};
    TrainConfig ls_a = ce;
    ls_a.loss = LossMode{LossKind::LS, 0.1, 0.0};
    TrainConfig cda_zero = ce;
    cda_zero.loss = LossMode{LossKind::CdaLs, 0.1, 0.0};

    const auto ce_model = train(data, ce);
    const auto ls_model = train(data, ls);
    CHECK(ce_model.model == ls_model.model);
    CHECK(ce_model.trace.back().train_loss == ls_model.trace.back().train_loss);
    CHECK(train(data, ls_a).model == train(data, cda_zero).model);
}

TEST_CASE("self-distillation") {
    const auto data = small_mixture(11);
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.seed = 2;
    const auto teacher = train(data, cfg).model;

    SUBCASE("lambda zero is plain cross-entropy training") {
        DistillConfig d{TemperatureVector::uniform(4, 4.0), 0.0, cfg};
        const auto student = self_distill(teacher, data, d);
        const auto plain = train(data, cfg);
        CHECK(student.model == plain.model);
        for (std::size_t e = 0; e < plain.trace.size(); ++e) {
            CHECK(student.trace[e].train_loss == plain.trace[e].train_loss);
        }
    }
    SUBCASE("lambda one distills towards the teacher") {
        DistillConfig d{TemperatureVector({1.0, 1.5, 2.0, 4.0}), 1.0, cfg};
        d.train.epochs = 10;
        const auto student = self_distill(teacher, data, d);
        CHECK(student.trace.back().train_loss < student.trace.front().train_loss);
        CHECK(student.trace.back().train_loss < 0.05);
    }
    SUBCASE("temperature length must match the classes") {
        DistillConfig d{TemperatureVector::uniform(3, 4.0), 0.5, cfg};
        CHECK_THROWS_AS((void)self_distill(teacher, data, d), Error);
    }
    SUBCASE("lambda outside [0, 1] is rejected") {
        DistillConfig d{TemperatureVector::uniform(4, 4.0), 1.5, cfg};
        CHECK_THROWS_AS((void)self_distill(teacher, data, d), Error);
    }
}
