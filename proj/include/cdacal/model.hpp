#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cdacal/core.hpp"
#include "cdacal/datagen.hpp"

namespace cdacal {

/// Multinomial logistic regression, optionally with one tanh hidden layer.
///
/// Parameters live in one flat vector so the optimizer and gradient checks can
/// treat them uniformly. Layout, with K = hidden_width if non-zero else input_dim:
///   [hidden W1 (H x D) | hidden b1 (H)]   only when hidden_width > 0
///   [output W (N x K)  | output b (N)]
class LinearModel {
public:
    LinearModel(std::size_t input_dim, std::size_t num_classes, std::size_t hidden_width = 0);

    [[nodiscard]] std::size_t input_dim() const noexcept { return input_dim_; }
    [[nodiscard]] std::size_t num_classes() const noexcept { return num_classes_; }
    [[nodiscard]] std::size_t hidden_width() const noexcept { return hidden_width_; }
    [[nodiscard]] std::size_t parameter_count() const noexcept { return params_.size(); }

    [[nodiscard]] std::span<double> params() noexcept { return params_; }
    [[nodiscard]] std::span<const double> params() const noexcept { return params_; }

    /// True for entries of a weight matrix (subject to L2), false for biases.
    [[nodiscard]] bool is_weight(std::size_t index) const noexcept;

    /// `hidden` must hold hidden_width() entries (may be empty for the linear model).
    void forward_row(std::span<const double> x, std::span<double> hidden,
                     std::span<double> logits) const;

    /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(logits) for one row.
    /// `hidden` is the activation from forward_row; `scratch` holds hidden_width() entries.
    void backward_row(std::span<const double> x, std::span<const double> hidden,
                      std::span<const double> dlogits, std::span<double> grad,
                      std::span<double> scratch) const;

    friend bool operator==(const LinearModel&, const LinearModel&) = default;

private:
    [[nodiscard]] std::size_t output_offset() const noexcept;
    [[nodiscard]] std::size_t output_inputs() const noexcept;

    std::size_t input_dim_;
    std::size_t num_classes_;
    std::size_t hidden_width_;
    std::vector<double> params_;
};

Matrix forward(const LinearModel& model, const Matrix& features);
LogitSet forward(const LinearModel& model, const Samples& samples);

enum class LossKind { CE, LS, CdaLs };

struct LossMode {
    LossKind kind = LossKind::CE;
    double alpha = 0.0;
    double gamma = 0.0;
};

struct TrainConfig {
    int epochs = 30;
    std::size_t batch_size = 128;
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    LossMode loss;
    double l2 = 0.0;
    std::size_t hidden_width = 0;
    /// Standard deviation of the initial output weights of the linear model.
    double init_scale = 0.01;
    /// Divide each smoothed target row by its sum.
    bool renormalize_targets = false;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    std::optional<double> val_acc;
    std::optional<double> val_ece;
};

struct TrainResult {
    LinearModel model;
    std::vector<EpochStats> trace;
};

/// Seeded starting point shared by train and self_distill.
LinearModel initialize_model(std::size_t input_dim, std::size_t num_classes,
                             const TrainConfig& cfg);

/// Minibatch SGD with momentum on the soft-label cross-entropy. Smoothed targets
/// (LS / CDA-LS) are built once from the training split's frequency profile.
TrainResult train(const Samples& data, const TrainConfig& cfg,
                  const Samples* validation = nullptr);

/// KL(softmax(teacher / T) || softmax(student / T)) with per-class T.
double kd_loss(std::span<const double> teacher_logits, std::span<const double> student_logits,
               const TemperatureVector& temps);

/// Gradient of kd_loss with respect to the student logits; the teacher is constant.
void kd_grad(std::span<const double> teacher_logits, std::span<const double> student_logits,
             const TemperatureVector& temps, std::span<double> grad);

struct DistillConfig {
    TemperatureVector temps = TemperatureVector::uniform(2, 4.0);
    double fuse_lambda = 0.5;
    TrainConfig train;

    void validate(std::size_t num_classes) const;
};

/// Trains a fresh student on (1 - lambda) * CE(hard labels) + lambda * KD(teacher).
/// Teacher logits are computed once up front.
TrainResult self_distill(const LinearModel& teacher, const Samples& data,
                         const DistillConfig& cfg, const Samples* validation = nullptr);

}  // namespace cdacal
