#include "cdacal/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "cdacal/calibrate.hpp"
#include "cdacal/metrics.hpp"
#include "cdacal/rng.hpp"
#include "cdacal/smooth.hpp"

namespace cdacal {

LinearModel::LinearModel(std::size_t input_dim, std::size_t num_classes, std::size_t hidden_width)
    : input_dim_(input_dim), num_classes_(num_classes), hidden_width_(hidden_width) {
    if (input_dim < 1 || num_classes < 2) {
        throw Error(ErrorKind::Shape, "model needs input_dim >= 1 and at least two classes");
    }
    params_.assign(output_offset() + num_classes * output_inputs() + num_classes, 0.0);
}

std::size_t LinearModel::output_offset() const noexcept {
    return hidden_width_ == 0 ? 0 : hidden_width_ * input_dim_ + hidden_width_;
}

std::size_t LinearModel::output_inputs() const noexcept {
    return hidden_width_ == 0 ? input_dim_ : hidden_width_;
}

bool LinearModel::is_weight(std::size_t index) const noexcept {
    const std::size_t out = output_offset();
    if (index < out) return index < hidden_width_ * input_dim_;
    return index - out < num_classes_ * output_inputs();
}

void LinearModel::forward_row(std::span<const double> x, std::span<double> hidden,
                              std::span<double> logits) const {
    std::span<const double> inputs = x;
    if (hidden_width_ > 0) {
        const double* w1 = params_.data();
        const double* b1 = w1 + hidden_width_ * input_dim_;
        for (std::size_t k = 0; k < hidden_width_; ++k) {
            double a = b1[k];
            for (std::size_t d = 0; d < input_dim_; ++d) a += w1[k * input_dim_ + d] * x[d];
            hidden[k] = std::tanh(a);
        }
        inputs = hidden;
    }
    const std::size_t fan_in = output_inputs();
    const double* w = params_.data() + output_offset();
    const double* b = w + num_classes_ * fan_in;
    for (std::size_t n = 0; n < num_classes_; ++n) {
        double z = b[n];
        for (std::size_t k = 0; k < fan_in; ++k) z += w[n * fan_in + k] * inputs[k];
        logits[n] = z;
    }
}

void LinearModel::backward_row(std::span<const double> x, std::span<const double> hidden,
                               std::span<const double> dlogits, std::span<double> grad,
                               std::span<double> scratch) const {
    const std::size_t fan_in = output_inputs();
    std::span<const double> inputs = hidden_width_ > 0 ? hidden : x;
    const std::size_t out = output_offset();
    const double* w = params_.data() + out;
    double* gw = grad.data() + out;
    double* gb = gw + num_classes_ * fan_in;
    for (std::size_t n = 0; n < num_classes_; ++n) {
        for (std::size_t k = 0; k < fan_in; ++k) gw[n * fan_in + k] += dlogits[n] * inputs[k];
        gb[n] += dlogits[n];
    }
    if (hidden_width_ == 0) return;

    for (std::size_t k = 0; k < hidden_width_; ++k) {
        double dh = 0.0;
        for (std::size_t n = 0; n < num_classes_; ++n) dh += w[n * fan_in + k] * dlogits[n];
        scratch[k] = dh * (1.0 - hidden[k] * hidden[k]);
    }
    double* gw1 = grad.data();
    double* gb1 = gw1 + hidden_width_ * input_dim_;
    for (std::size_t k = 0; k < hidden_width_; ++k) {
        for (std::size_t d = 0; d < input_dim_; ++d) gw1[k * input_dim_ + d] += scratch[k] * x[d];
        gb1[k] += scratch[k];
    }
}

Matrix forward(const LinearModel& model, const Matrix& features) {
    if (features.cols() != model.input_dim()) {
        throw Error(ErrorKind::Shape, "features have " + std::to_string(features.cols()) +
                                          " columns, model expects " +
                                          std::to_string(model.input_dim()));
    }
    Matrix logits(features.rows(), model.num_classes());
    std::vector<double> hidden(model.hidden_width());
    for (std::size_t i = 0; i < features.rows(); ++i) {
        model.forward_row(features.row(i), hidden, logits.row(i));
    }
    return logits;
}

LogitSet forward(const LinearModel& model, const Samples& samples) {
    return LogitSet(forward(model, samples.features), samples.labels);
}

void TrainConfig::validate() const {
    if (epochs < 1) throw Error(ErrorKind::InvalidInput, "epochs must be >= 1");
    if (batch_size < 1) throw Error(ErrorKind::InvalidInput, "batch_size must be >= 1");
    // Zero is accepted so a run can be checked for leaving parameters untouched.
    if (!(learning_rate >= 0.0 && std::isfinite(learning_rate))) {
        throw Error(ErrorKind::InvalidInput, "learning_rate must be finite and non-negative");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw Error(ErrorKind::InvalidInput, "momentum must lie in [0, 1)");
    }
    if (!(l2 >= 0.0 && std::isfinite(l2))) throw Error(ErrorKind::InvalidInput, "l2 must be >= 0");
    if (!(init_scale >= 0.0 && std::isfinite(init_scale))) {
        throw Error(ErrorKind::InvalidInput, "init_scale must be >= 0");
    }
}

void DistillConfig::validate(std::size_t num_classes) const {
    train.validate();
    if (temps.size() != num_classes) {
        throw Error(ErrorKind::Shape, "distillation temperatures have " +
                                          std::to_string(temps.size()) + " entries for " +
                                          std::to_string(num_classes) + " classes");
    }
    if (!(fuse_lambda >= 0.0 && fuse_lambda <= 1.0)) {
        throw Error(ErrorKind::InvalidInput, "fuse_lambda must lie in [0, 1]");
    }
}

LinearModel initialize_model(std::size_t input_dim, std::size_t num_classes,
                             const TrainConfig& cfg) {
    LinearModel model(input_dim, num_classes, cfg.hidden_width);
    Rng rng(cfg.seed);
    auto params = model.params();
    const std::size_t hidden = cfg.hidden_width;
    std::size_t i = 0;
    if (hidden > 0) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
        for (; i < hidden * input_dim; ++i) params[i] = scale * rng.normal();
        i += hidden;
    }
    const double scale = hidden > 0 ? 1.0 / std::sqrt(static_cast<double>(hidden)) : cfg.init_scale;
    const std::size_t fan_in = hidden > 0 ? hidden : input_dim;
    for (std::size_t k = 0; k < num_classes * fan_in; ++k, ++i) params[i] = scale * rng.normal();
    return model;
}

namespace {

// Loss of one row given its logits; writes d(loss)/d(logits) into grad.
using RowObjective =
    std::function<double(std::size_t row, std::span<const double> logits, std::span<double> grad)>;

TrainResult run_sgd(const Samples& data, const TrainConfig& cfg, const RowObjective& objective,
                    const Samples* validation) {
    if (data.size() == 0) throw Error(ErrorKind::EmptyDataset, "training split is empty");
    LinearModel model = initialize_model(data.features.cols(), data.num_classes, cfg);
    // The shuffle stream is distinct from the initialization stream but derived from the same seed.
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    const std::size_t n_params = model.parameter_count();
    const std::size_t n_classes = model.num_classes();
    std::vector<double> grad(n_params), velocity(n_params, 0.0);
    std::vector<double> hidden(model.hidden_width()), scratch(model.hidden_width());
    std::vector<double> logits(n_classes), dlogits(n_classes);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result{std::move(model), {}};
    auto& current = result.model;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                const auto x = data.features.row(i);
                current.forward_row(x, hidden, logits);
                if (!std::all_of(logits.begin(), logits.end(),
                                 [](double v) { return std::isfinite(v); })) {
                    throw Error(ErrorKind::TrainingDiverged,
                                "non-finite logits at epoch " + std::to_string(epoch));
                }
                epoch_loss += objective(i, logits, dlogits);
                current.backward_row(x, hidden, dlogits, grad, scratch);
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            auto p = current.params();
            for (std::size_t j = 0; j < n_params; ++j) {
                double g = grad[j] * inv;
                if (cfg.l2 > 0.0 && current.is_weight(j)) g += cfg.l2 * p[j];
                velocity[j] = cfg.momentum * velocity[j] + g;
                p[j] -= cfg.learning_rate * velocity[j];
            }
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = epoch_loss / static_cast<double>(data.size());
        const auto p = current.params();
        if (!std::isfinite(stats.train_loss) ||
            !std::all_of(p.begin(), p.end(), [](double v) { return std::isfinite(v); })) {
            throw Error(ErrorKind::TrainingDiverged,
                        "training diverged at epoch " + std::to_string(epoch));
        }
        if (validation != nullptr && validation->size() > 0) {
            const auto val_logits = forward(current, *validation);
            const auto probs =
                apply_temperature(val_logits, TemperatureVector::uniform(n_classes, 1.0));
            stats.val_acc = accuracy(probs);
            stats.val_ece = ece(bin_stats(probs));
        }
        result.trace.push_back(stats);
    }
    return result;
}

SmoothingVector smoothing_for(const Samples& data, const LossMode& mode) {
    switch (mode.kind) {
        case LossKind::CE:
            return SmoothingVector::uniform(data.num_classes, 0.0);
        case LossKind::LS:
            return SmoothingVector::uniform(data.num_classes, mode.alpha);
        case LossKind::CdaLs:
            return cda_alpha(mode.alpha, frequency_profile(data.labels, data.num_classes),
                             mode.gamma);
    }
    return SmoothingVector::uniform(data.num_classes, 0.0);
}

double kl_from_probs(std::span<const double> teacher, std::span<const double> student) {
    double kl = 0.0;
    for (std::size_t c = 0; c < teacher.size(); ++c) {
        kl += teacher[c] *
              (std::log(std::max(teacher[c], kLogClamp)) - std::log(std::max(student[c], kLogClamp)));
    }
    return kl;
}

}  // namespace

TrainResult train(const Samples& data, const TrainConfig& cfg, const Samples* validation) {
    cfg.validate();
    const auto smoothing = smoothing_for(data, cfg.loss);
    const auto targets =
        soft_labels(data.labels, smoothing, data.num_classes, cfg.renormalize_targets);
    const auto unit = TemperatureVector::uniform(data.num_classes, 1.0);
    std::vector<double> probs(data.num_classes);
    const RowObjective objective = [&](std::size_t i, std::span<const double> logits,
                                       std::span<double> grad) {
        softmax_into(logits, unit, probs);
        const auto target = targets.values.row(i);
        soft_ce_grad(probs, target, grad);
        return soft_ce_loss(probs, target);
    };
    return run_sgd(data, cfg, objective, validation);
}

double kd_loss(std::span<const double> teacher_logits, std::span<const double> student_logits,
               const TemperatureVector& temps) {
    if (teacher_logits.size() != student_logits.size()) {
        throw Error(ErrorKind::Shape, "kd_loss: teacher and student lengths differ");
    }
    const auto teacher = softmax(teacher_logits, temps);
    const auto student = softmax(student_logits, temps);
    return kl_from_probs(teacher, student);
}

void kd_grad(std::span<const double> teacher_logits, std::span<const double> student_logits,
             const TemperatureVector& temps, std::span<double> grad) {
    const auto teacher = softmax(teacher_logits, temps);
    const auto student = softmax(student_logits, temps);
    for (std::size_t c = 0; c < grad.size(); ++c) grad[c] = (student[c] - teacher[c]) / temps[c];
}

TrainResult self_distill(const LinearModel& teacher, const Samples& data, const DistillConfig& cfg,
                         const Samples* validation) {
    cfg.validate(data.num_classes);
    if (teacher.input_dim() != data.features.cols() ||
        teacher.num_classes() != data.num_classes) {
        throw Error(ErrorKind::Shape, "teacher does not match the dataset's feature space");
    }
    const std::size_t n = data.num_classes;
    const Matrix teacher_logits = forward(teacher, data.features);
    Matrix teacher_probs(data.size(), n);
    for (std::size_t i = 0; i < data.size(); ++i) {
        softmax_into(teacher_logits.row(i), cfg.temps, teacher_probs.row(i));
    }
    const auto hard = soft_labels(data.labels, SmoothingVector::uniform(n, 0.0), n);
    const auto unit = TemperatureVector::uniform(n, 1.0);
    const double lambda = cfg.fuse_lambda;
    std::vector<double> probs(n), scaled(n), ce_grad(n);
    const RowObjective objective = [&](std::size_t i, std::span<const double> logits,
                                       std::span<double> grad) {
        softmax_into(logits, unit, probs);
        const auto target = hard.values.row(i);
        soft_ce_grad(probs, target, ce_grad);
        const double ce = soft_ce_loss(probs, target);

        softmax_into(logits, cfg.temps, scaled);
        const auto tp = teacher_probs.row(i);
        const double kd = kl_from_probs(tp, scaled);
        for (std::size_t c = 0; c < n; ++c) {
            grad[c] = (1.0 - lambda) * ce_grad[c] + lambda * (scaled[c] - tp[c]) / cfg.temps[c];
        }
        return (1.0 - lambda) * ce + lambda * kd;
    };
    return run_sgd(data, cfg.train, objective, validation);
}

}  // namespace cdacal
