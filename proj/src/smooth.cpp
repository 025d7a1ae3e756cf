#include "cdacal/smooth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cdacal {

SmoothingVector::SmoothingVector(std::vector<double> alphas) : alphas_(std::move(alphas)) {
    for (std::size_t i = 0; i < alphas_.size(); ++i) {
        if (!(alphas_[i] >= 0.0 && alphas_[i] < 1.0)) {
            throw Error(ErrorKind::InvalidSmoothing,
                        "smoothing factor for class " + std::to_string(i) + " must lie in [0, 1)");
        }
    }
}

SmoothingVector SmoothingVector::uniform(std::size_t num_classes, double alpha) {
    return SmoothingVector(std::vector<double>(num_classes, alpha));
}

SmoothingVector cda_alpha(double alpha, const ClassFrequencyProfile& profile, double gamma) {
    if (!(alpha >= 0.0 && alpha < 1.0)) {
        throw Error(ErrorKind::InvalidSmoothing, "alpha must lie in [0, 1)");
    }
    if (!(gamma >= 0.0 && std::isfinite(gamma))) {
        throw Error(ErrorKind::InvalidSmoothing, "gamma must be finite and non-negative");
    }
    if (alpha + gamma >= 1.0) {
        throw Error(ErrorKind::InvalidSmoothing,
                    "alpha + gamma must be < 1 or the head class keeps no true-class mass");
    }
    std::vector<double> alphas;
    alphas.reserve(profile.num_classes());
    for (double f : profile.normalized()) alphas.push_back(alpha + gamma * f);
    return SmoothingVector(std::move(alphas));
}

void soft_label_row(int label, const SmoothingVector& smoothing, std::span<double> out) {
    const std::size_t n = out.size();
    if (smoothing.size() != n) {
        throw Error(ErrorKind::Shape, "smoothing vector length does not match class count");
    }
    const auto y = static_cast<std::size_t>(label);
    if (label < 0 || y >= n) {
        throw Error(ErrorKind::InvalidInput, "label " + std::to_string(label) + " out of range");
    }
    const double classes = static_cast<double>(n);
    for (std::size_t c = 0; c < n; ++c) out[c] = smoothing[c] / classes;
    out[y] = (1.0 - smoothing[y]) + smoothing[y] / classes;
}

SoftLabelSet soft_labels(std::span<const int> labels, const SmoothingVector& smoothing,
                         std::size_t num_classes, bool renormalize) {
    SoftLabelSet out{Matrix(labels.size(), num_classes), std::vector<double>(labels.size())};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto row = out.values.row(i);
        soft_label_row(labels[i], smoothing, row);
        double sum = 0.0;
        for (double v : row) sum += v;
        out.row_sums[i] = sum;
        if (renormalize) {
            for (double& v : row) v /= sum;
        }
    }
    return out;
}

double soft_ce_loss(std::span<const double> probs, std::span<const double> targets) {
    if (probs.size() != targets.size()) {
        throw Error(ErrorKind::Shape, "soft_ce_loss: probability and target lengths differ");
    }
    double loss = 0.0;
    for (std::size_t c = 0; c < probs.size(); ++c) {
        loss -= targets[c] * std::log(std::max(probs[c], kLogClamp));
    }
    return loss;
}

void soft_ce_grad(std::span<const double> probs, std::span<const double> targets,
                  std::span<double> grad) {
    double mass = 0.0;
    for (double t : targets) mass += t;
    for (std::size_t c = 0; c < probs.size(); ++c) grad[c] = mass * probs[c] - targets[c];
}

}  // namespace cdacal
