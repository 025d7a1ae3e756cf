#include "cdacal/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cdacal {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidInput: return "invalid-input";
        case ErrorKind::InvalidTemperature: return "invalid-temperature";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::UndefinedMetric: return "undefined-metric";
        case ErrorKind::InfeasibleSpec: return "infeasible-spec";
        case ErrorKind::InvalidSpec: return "invalid-spec";
        case ErrorKind::EmptyDataset: return "empty-dataset";
        case ErrorKind::FitFailure: return "fit-failure";
        case ErrorKind::InvalidSmoothing: return "invalid-smoothing";
        case ErrorKind::WrongBinning: return "wrong-binning";
        case ErrorKind::TrainingDiverged: return "training-diverged";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Usage: return "usage";
    }
    return "unknown";
}

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Usage:
            return 1;
        case ErrorKind::FitFailure:
        case ErrorKind::TrainingDiverged:
            return 3;
        default:
            return 2;
    }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw Error(ErrorKind::Shape, "matrix data has " + std::to_string(data_.size()) +
                                          " entries, expected " + std::to_string(rows * cols));
    }
}

namespace {

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t num_classes) {
    if (labels.size() != rows) {
        throw Error(ErrorKind::Shape, "label count " + std::to_string(labels.size()) +
                                          " does not match row count " + std::to_string(rows));
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
            throw Error(ErrorKind::InvalidInput, "label " + std::to_string(labels[i]) +
                                                     " at row " + std::to_string(i) +
                                                     " is outside [0, " +
                                                     std::to_string(num_classes) + ")");
        }
    }
}

void check_dims(const Matrix& m) {
    if (m.rows() < 1) throw Error(ErrorKind::InvalidInput, "at least one sample is required");
    if (m.cols() < 2) throw Error(ErrorKind::InvalidInput, "at least two classes are required");
}

}  // namespace

LogitSet::LogitSet(Matrix values, std::vector<int> labels)
    : values_(std::move(values)), labels_(std::move(labels)) {
    check_dims(values_);
    for (std::size_t r = 0; r < values_.rows(); ++r) {
        for (double v : values_.row(r)) {
            if (!std::isfinite(v)) {
                throw Error(ErrorKind::InvalidInput,
                            "non-finite logit at row " + std::to_string(r));
            }
        }
    }
    check_labels(labels_, values_.rows(), values_.cols());
}

ProbSet::ProbSet(Matrix values, std::vector<int> labels)
    : values_(std::move(values)), labels_(std::move(labels)) {
    check_dims(values_);
    for (std::size_t r = 0; r < values_.rows(); ++r) {
        double sum = 0.0;
        for (double v : values_.row(r)) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw Error(ErrorKind::InvalidInput,
                            "probability outside [0,1] at row " + std::to_string(r));
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance) {
            throw Error(ErrorKind::InvalidInput,
                        "probability row " + std::to_string(r) + " sums to " +
                            std::to_string(sum));
        }
    }
    check_labels(labels_, values_.rows(), values_.cols());
}

ClassFrequencyProfile::ClassFrequencyProfile(std::vector<std::int64_t> counts)
    : counts_(std::move(counts)) {
    std::int64_t max_count = 0;
    std::int64_t min_positive = 0;
    for (std::int64_t c : counts_) {
        if (c < 0) throw Error(ErrorKind::InvalidInput, "class counts must be non-negative");
        max_count = std::max(max_count, c);
        if (c > 0 && (min_positive == 0 || c < min_positive)) min_positive = c;
    }
    if (max_count == 0) throw Error(ErrorKind::EmptyDataset, "all class counts are zero");
    normalized_.reserve(counts_.size());
    for (std::int64_t c : counts_) {
        normalized_.push_back(static_cast<double>(c) / static_cast<double>(max_count));
    }
    imbalance_ratio_ = static_cast<double>(max_count) / static_cast<double>(min_positive);
}

TemperatureVector::TemperatureVector(std::vector<double> temps) : temps_(std::move(temps)) {
    if (temps_.empty()) throw Error(ErrorKind::InvalidTemperature, "empty temperature vector");
    for (std::size_t i = 0; i < temps_.size(); ++i) {
        if (!(std::isfinite(temps_[i]) && temps_[i] > 0.0)) {
            throw Error(ErrorKind::InvalidTemperature,
                        "temperature for class " + std::to_string(i) + " must be positive");
        }
    }
}

TemperatureVector TemperatureVector::uniform(std::size_t num_classes, double t) {
    return TemperatureVector(std::vector<double>(num_classes, t));
}

bool TemperatureVector::is_constant() const noexcept {
    return std::all_of(temps_.begin(), temps_.end(),
                       [&](double t) { return t == temps_.front(); });
}

std::size_t argmax(std::span<const double> row) noexcept {
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
        if (row[c] > row[best]) best = c;
    }
    return best;
}

void softmax_into(std::span<const double> logits, const TemperatureVector& temps,
                  std::span<double> out) {
    const std::size_t n = logits.size();
    if (temps.size() != n || out.size() != n) {
        throw Error(ErrorKind::Shape, "softmax: logits, temperatures and output differ in length");
    }
    double max_scaled = -INFINITY;
    for (std::size_t c = 0; c < n; ++c) {
        if (std::isnan(logits[c])) throw Error(ErrorKind::InvalidInput, "softmax: NaN logit");
        out[c] = logits[c] / temps[c];
        max_scaled = std::max(max_scaled, out[c]);
    }
    if (!std::isfinite(max_scaled)) {
        throw Error(ErrorKind::InvalidInput, "softmax: non-finite logit");
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        out[c] = std::exp(out[c] - max_scaled);
        sum += out[c];
    }
    for (std::size_t c = 0; c < n; ++c) out[c] /= sum;
}

std::vector<double> softmax(std::span<const double> logits, const TemperatureVector& temps) {
    std::vector<double> out(logits.size());
    softmax_into(logits, temps, out);
    return out;
}

double nll(const LogitSet& logits, const TemperatureVector& temps) {
    const std::size_t n = logits.num_classes();
    if (temps.size() != n) throw Error(ErrorKind::Shape, "nll: temperature length mismatch");
    std::vector<double> scaled(n);
    std::vector<double> inverse(n);
    for (std::size_t c = 0; c < n; ++c) inverse[c] = 1.0 / temps[c];
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const auto row = logits.values().row(i);
        double max_scaled = -INFINITY;
        for (std::size_t c = 0; c < n; ++c) {
            scaled[c] = row[c] * inverse[c];
            max_scaled = std::max(max_scaled, scaled[c]);
        }
        double sum = 0.0;
        for (std::size_t c = 0; c < n; ++c) sum += std::exp(scaled[c] - max_scaled);
        const auto y = static_cast<std::size_t>(logits.labels()[i]);
        total += std::log(sum) - (scaled[y] - max_scaled);
    }
    return total / static_cast<double>(logits.size());
}

double accuracy(const Matrix& scores, std::span<const int> labels) {
    if (scores.rows() == 0) throw Error(ErrorKind::UndefinedMetric, "accuracy of an empty set");
    if (labels.size() != scores.rows()) {
        throw Error(ErrorKind::Shape, "accuracy: label count does not match row count");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        if (argmax(scores.row(i)) == static_cast<std::size_t>(labels[i])) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(scores.rows());
}

double accuracy(const LogitSet& logits) { return accuracy(logits.values(), logits.labels()); }

double accuracy(const ProbSet& probs) { return accuracy(probs.values(), probs.labels()); }

}  // namespace cdacal
