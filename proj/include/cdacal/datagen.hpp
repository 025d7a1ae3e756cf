#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cdacal/core.hpp"

namespace cdacal {

struct SyntheticSpec {
    std::size_t num_classes = 10;
    std::int64_t max_per_class = 1000;
    double imbalance_ratio = 100.0;
    std::size_t feature_dim = 16;
    double class_separation = 3.0;
    std::uint64_t seed = 0;
    /// Fraction of each class routed to the held-out split (stratified).
    double held_out_fraction = 0.2;
    /// When non-zero, the held-out split is instead a separately drawn, class-balanced
    /// set with this many samples per class, and every long-tailed sample is training data.
    std::int64_t balanced_held_out_per_class = 0;
};

/// Feature rows with aligned labels.
struct Samples {
    Matrix features;
    std::vector<int> labels;
    std::size_t num_classes = 0;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
};

struct Dataset {
    Matrix features;
    std::vector<int> labels;
    std::size_t num_classes = 0;
    ClassFrequencyProfile profile{std::vector<std::int64_t>{1}};
    /// 1 for rows in the held-out split.
    std::vector<std::uint8_t> held_out;
    std::uint64_t seed = 0;

    [[nodiscard]] Samples train() const;
    [[nodiscard]] Samples held_out_samples() const;
    /// Frequency profile of the training split alone.
    [[nodiscard]] ClassFrequencyProfile train_profile() const;
};

/// Exponential long-tail profile: n_i = round(max * ratio^(-i/(N-1))).
std::vector<std::int64_t> longtail_counts(std::int64_t max_per_class, std::size_t num_classes,
                                          double imbalance_ratio);

/// Draws an isotropic unit-variance Gaussian mixture whose class sizes follow
/// longtail_counts. Features are rounded to float32 so an on-disk copy is lossless.
Dataset sample_gaussian_mixture(const SyntheticSpec& spec);

ClassFrequencyProfile frequency_profile(std::span<const int> labels, std::size_t num_classes);

/// Class-stratified split of `samples`. Classes with at least two members keep at
/// least one in each part; singletons stay in the first part.
std::pair<Samples, Samples> stratified_split(const Samples& samples, double second_fraction,
                                             std::uint64_t seed);

}  // namespace cdacal
