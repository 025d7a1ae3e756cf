#pragma once

#include <span>
#include <vector>

#include "cdacal/core.hpp"

namespace cdacal {

/// Per-class smoothing factors, each in [0, 1). A constant vector is plain label smoothing.
class SmoothingVector {
public:
    explicit SmoothingVector(std::vector<double> alphas);
    static SmoothingVector uniform(std::size_t num_classes, double alpha);

    [[nodiscard]] std::span<const double> values() const noexcept { return alphas_; }
    [[nodiscard]] std::size_t size() const noexcept { return alphas_.size(); }
    double operator[](std::size_t i) const noexcept { return alphas_[i]; }

private:
    std::vector<double> alphas_;
};

constexpr double kLogClamp = 1e-12;

/// alpha_c = alpha + gamma * f_c. Throws InvalidSmoothing when alpha + gamma >= 1.
SmoothingVector cda_alpha(double alpha, const ClassFrequencyProfile& profile, double gamma);

/// Writes one target row: (1 - a_y) + a_y / N at the true class, a_c / N elsewhere.
void soft_label_row(int label, const SmoothingVector& smoothing, std::span<double> out);

/// Rows are left as the formula produces them unless `renormalize` is set.
SoftLabelSet soft_labels(std::span<const int> labels, const SmoothingVector& smoothing,
                         std::size_t num_classes, bool renormalize = false);

/// sum_c -targets_c * log(max(probs_c, 1e-12)).
double soft_ce_loss(std::span<const double> probs, std::span<const double> targets);

/// Gradient of soft_ce_loss(softmax(z), targets) with respect to z, given probs = softmax(z):
/// sum(targets) * probs - targets.
void soft_ce_grad(std::span<const double> probs, std::span<const double> targets,
                  std::span<double> grad);

}  // namespace cdacal
