#include "cdacal/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cdacal/rng.hpp"

namespace cdacal {

namespace {

Samples select(const Dataset& data, std::uint8_t which) {
    Samples out;
    out.num_classes = data.num_classes;
    std::size_t n = 0;
    for (auto flag : data.held_out) n += (flag == which);
    out.features = Matrix(n, data.features.cols());
    out.labels.reserve(n);
    std::size_t r = 0;
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        if (data.held_out[i] != which) continue;
        std::copy(data.features.row(i).begin(), data.features.row(i).end(),
                  out.features.row(r).begin());
        out.labels.push_back(data.labels[i]);
        ++r;
    }
    return out;
}

// Number of members of a class of size n that go to the second part of a split.
std::size_t second_part_size(std::size_t n, double fraction) {
    if (fraction <= 0.0 || n < 2) return 0;
    auto k = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
    return std::clamp<std::size_t>(k, 1, n - 1);
}

// Marks `k` of `members` (chosen uniformly) in `flags`.
void mark_random(std::vector<std::size_t>& members, std::size_t k, Rng& rng,
                 std::vector<std::uint8_t>& flags) {
    for (std::size_t j = 0; j < k; ++j) {
        const auto pick = j + rng.below(members.size() - j);
        std::swap(members[j], members[pick]);
        flags[members[j]] = 1;
    }
}

void draw_point(std::span<const double> mean, Rng& rng, std::span<double> out) {
    for (std::size_t d = 0; d < mean.size(); ++d) {
        out[d] = static_cast<double>(static_cast<float>(mean[d] + rng.normal()));
    }
}

}  // namespace

Samples Dataset::train() const { return select(*this, 0); }

Samples Dataset::held_out_samples() const { return select(*this, 1); }

ClassFrequencyProfile Dataset::train_profile() const {
    std::vector<std::int64_t> counts(num_classes, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (held_out[i] == 0) ++counts[static_cast<std::size_t>(labels[i])];
    }
    return ClassFrequencyProfile(std::move(counts));
}

std::vector<std::int64_t> longtail_counts(std::int64_t max_per_class, std::size_t num_classes,
                                          double imbalance_ratio) {
    if (num_classes < 2) throw Error(ErrorKind::InvalidSpec, "need at least two classes");
    if (!(imbalance_ratio >= 1.0) || !std::isfinite(imbalance_ratio)) {
        throw Error(ErrorKind::InvalidSpec, "imbalance ratio must be finite and >= 1");
    }
    if (static_cast<double>(max_per_class) / imbalance_ratio < 1.0) {
        throw Error(ErrorKind::InfeasibleSpec,
                    "max_per_class " + std::to_string(max_per_class) + " with ratio " +
                        std::to_string(imbalance_ratio) + " leaves the rarest class empty");
    }
    std::vector<std::int64_t> counts(num_classes);
    const double last = static_cast<double>(num_classes - 1);
    for (std::size_t i = 0; i < num_classes; ++i) {
        const double exact = static_cast<double>(max_per_class) *
                             std::pow(imbalance_ratio, -static_cast<double>(i) / last);
        counts[i] = std::max<std::int64_t>(1, std::llround(exact));
    }
    return counts;
}

ClassFrequencyProfile frequency_profile(std::span<const int> labels, std::size_t num_classes) {
    std::vector<std::int64_t> counts(num_classes, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
            throw Error(ErrorKind::InvalidInput,
                        "label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                            " is outside [0, " + std::to_string(num_classes) + ")");
        }
        ++counts[static_cast<std::size_t>(labels[i])];
    }
    return ClassFrequencyProfile(std::move(counts));
}

Dataset sample_gaussian_mixture(const SyntheticSpec& spec) {
    if (spec.feature_dim < 1) throw Error(ErrorKind::InvalidSpec, "feature_dim must be >= 1");
    if (!(spec.class_separation > 0.0) || !std::isfinite(spec.class_separation)) {
        throw Error(ErrorKind::InvalidSpec, "class_separation must be positive");
    }
    if (!(spec.held_out_fraction >= 0.0 && spec.held_out_fraction < 1.0)) {
        throw Error(ErrorKind::InvalidSpec, "held_out_fraction must lie in [0, 1)");
    }
    if (spec.balanced_held_out_per_class < 0) {
        throw Error(ErrorKind::InvalidSpec, "balanced_held_out_per_class must be >= 0");
    }
    const auto counts = longtail_counts(spec.max_per_class, spec.num_classes,
                                        spec.imbalance_ratio);
    const std::size_t dim = spec.feature_dim;
    Rng rng(spec.seed);

    Matrix means(spec.num_classes, dim);
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        auto mean = means.row(c);
        double norm = 0.0;
        while (norm == 0.0) {
            norm = 0.0;
            for (auto& v : mean) {
                v = rng.normal();
                norm += v * v;
            }
            norm = std::sqrt(norm);
        }
        for (auto& v : mean) v *= spec.class_separation / norm;
    }

    const auto balanced = static_cast<std::size_t>(spec.balanced_held_out_per_class);
    const std::size_t longtail_total =
        static_cast<std::size_t>(std::accumulate(counts.begin(), counts.end(), std::int64_t{0}));
    const std::size_t total = longtail_total + balanced * spec.num_classes;

    Dataset data;
    data.num_classes = spec.num_classes;
    data.seed = spec.seed;
    data.features = Matrix(total, dim);
    data.labels.reserve(total);
    data.held_out.assign(total, 0);

    std::size_t r = 0;
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        for (std::int64_t k = 0; k < counts[c]; ++k, ++r) {
            draw_point(means.row(c), rng, data.features.row(r));
            data.labels.push_back(static_cast<int>(c));
        }
    }
    if (balanced > 0) {
        for (std::size_t c = 0; c < spec.num_classes; ++c) {
            for (std::size_t k = 0; k < balanced; ++k, ++r) {
                draw_point(means.row(c), rng, data.features.row(r));
                data.labels.push_back(static_cast<int>(c));
                data.held_out[r] = 1;
            }
        }
    } else {
        std::size_t start = 0;
        for (std::size_t c = 0; c < spec.num_classes; ++c) {
            const auto n = static_cast<std::size_t>(counts[c]);
            std::vector<std::size_t> members(n);
            std::iota(members.begin(), members.end(), start);
            mark_random(members, second_part_size(n, spec.held_out_fraction), rng, data.held_out);
            start += n;
        }
    }
    data.profile = frequency_profile(data.labels, spec.num_classes);
    return data;
}

std::pair<Samples, Samples> stratified_split(const Samples& samples, double second_fraction,
                                             std::uint64_t seed) {
    if (!(second_fraction >= 0.0 && second_fraction < 1.0)) {
        throw Error(ErrorKind::InvalidSpec, "split fraction must lie in [0, 1)");
    }
    Rng rng(seed);
    std::vector<std::uint8_t> flags(samples.size(), 0);
    std::vector<std::vector<std::size_t>> by_class(samples.num_classes);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        by_class[static_cast<std::size_t>(samples.labels[i])].push_back(i);
    }
    for (auto& members : by_class) {
        mark_random(members, second_part_size(members.size(), second_fraction), rng, flags);
    }
    Dataset view;
    view.features = samples.features;
    view.labels = samples.labels;
    view.num_classes = samples.num_classes;
    view.held_out = std::move(flags);
    return {view.train(), view.held_out_samples()};
}

}  // namespace cdacal
