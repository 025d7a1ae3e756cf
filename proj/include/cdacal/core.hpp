#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cdacal/error.hpp"

namespace cdacal {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    [[nodiscard]] std::span<double> row(std::size_t r) noexcept {
        return {data_.data() + r * cols_, cols_};
    }
    [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] std::span<double> data() noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Raw pre-softmax scores with aligned integer labels.
class LogitSet {
public:
    /// Throws InvalidInput on non-finite scores, out-of-range labels, M < 1 or N < 2.
    LogitSet(Matrix values, std::vector<int> labels);

    [[nodiscard]] const Matrix& values() const noexcept { return values_; }
    [[nodiscard]] std::span<const int> labels() const noexcept { return labels_; }
    [[nodiscard]] std::size_t num_classes() const noexcept { return values_.cols(); }
    [[nodiscard]] std::size_t size() const noexcept { return values_.rows(); }

private:
    Matrix values_;
    std::vector<int> labels_;
};

/// Row-stochastic predictions with aligned labels.
class ProbSet {
public:
    static constexpr double kRowSumTolerance = 1e-9;

    ProbSet(Matrix values, std::vector<int> labels);

    [[nodiscard]] const Matrix& values() const noexcept { return values_; }
    [[nodiscard]] std::span<const int> labels() const noexcept { return labels_; }
    [[nodiscard]] std::size_t num_classes() const noexcept { return values_.cols(); }
    [[nodiscard]] std::size_t size() const noexcept { return values_.rows(); }

private:
    Matrix values_;
    std::vector<int> labels_;
};

/// Per-class counts and their max-normalized frequencies.
class ClassFrequencyProfile {
public:
    /// Throws EmptyDataset when every count is zero.
    explicit ClassFrequencyProfile(std::vector<std::int64_t> counts);

    [[nodiscard]] std::span<const std::int64_t> counts() const noexcept { return counts_; }
    [[nodiscard]] std::span<const double> normalized() const noexcept { return normalized_; }
    /// max(count) / min(count) over classes with a non-zero count.
    [[nodiscard]] double imbalance_ratio() const noexcept { return imbalance_ratio_; }
    [[nodiscard]] std::size_t num_classes() const noexcept { return counts_.size(); }

private:
    std::vector<std::int64_t> counts_;
    std::vector<double> normalized_;
    double imbalance_ratio_ = 1.0;
};

/// Strictly positive per-class temperatures. A scalar temperature is a constant vector.
class TemperatureVector {
public:
    explicit TemperatureVector(std::vector<double> temps);
    static TemperatureVector uniform(std::size_t num_classes, double t);

    [[nodiscard]] std::span<const double> values() const noexcept { return temps_; }
    [[nodiscard]] std::size_t size() const noexcept { return temps_.size(); }
    double operator[](std::size_t i) const noexcept { return temps_[i]; }
    [[nodiscard]] bool is_constant() const noexcept;

private:
    std::vector<double> temps_;
};

/// Smoothed targets. Row sums are recorded rather than forced to one.
struct SoftLabelSet {
    Matrix values;
    std::vector<double> row_sums;
};

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> row) noexcept;

/// Writes softmax(logits / temps) into `out`. Stable under max-subtraction.
void softmax_into(std::span<const double> logits, const TemperatureVector& temps,
                  std::span<double> out);

std::vector<double> softmax(std::span<const double> logits, const TemperatureVector& temps);

/// Mean negative log-likelihood of the true class after temperature scaling, in nats.
double nll(const LogitSet& logits, const TemperatureVector& temps);

/// Fraction of rows whose argmax equals the label. Works on logits or probabilities.
double accuracy(const Matrix& scores, std::span<const int> labels);
double accuracy(const LogitSet& logits);
double accuracy(const ProbSet& probs);

}  // namespace cdacal
