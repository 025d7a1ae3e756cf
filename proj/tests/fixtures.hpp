#pragma once

// Shared generators for test data with known ground truth.

#include <cmath>
#include <vector>

#include "cdacal/core.hpp"
#include "cdacal/rng.hpp"

namespace fixture {

// Draws logits z ~ N(0, spread^2) per class and a label from softmax(z), so the
// logits are calibrated at T = 1. The stored logits are multiplied by `stretch`;
// the calibrating temperature of the returned set is therefore `stretch`.
inline cdacal::LogitSet calibrated_logits(std::uint64_t seed, std::size_t m, std::size_t n,
                                          double spread, double stretch = 1.0) {
    cdacal::Rng rng(seed);
    cdacal::Matrix z(m, n);
    std::vector<int> labels(m);
    std::vector<double> p(n);
    for (std::size_t i = 0; i < m; ++i) {
        double total = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            z(i, c) = spread * rng.normal();
            p[c] = std::exp(z(i, c));
            total += p[c];
        }
        double u = rng.uniform() * total;
        std::size_t y = 0;
        while (y + 1 < n && u >= p[y]) {
            u -= p[y];
            ++y;
        }
        labels[i] = static_cast<int>(y);
        for (std::size_t c = 0; c < n; ++c) z(i, c) *= stretch;
    }
    return cdacal::LogitSet(std::move(z), std::move(labels));
}

// Probabilities and labels where each label is drawn from its own row.
inline cdacal::ProbSet self_consistent_probs(std::uint64_t seed, std::size_t m, std::size_t n,
                                             double spread) {
    const auto logits = calibrated_logits(seed, m, n, spread);
    cdacal::Matrix probs(m, n);
    const auto unit = cdacal::TemperatureVector::uniform(n, 1.0);
    for (std::size_t i = 0; i < m; ++i) {
        cdacal::softmax_into(logits.values().row(i), unit, probs.row(i));
    }
    const auto labels = logits.labels();
    return cdacal::ProbSet(std::move(probs), std::vector<int>(labels.begin(), labels.end()));
}

}  // namespace fixture
