#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cdacal/core.hpp"

namespace cdacal {

struct MetricsConfig {
    int num_bins = 10;
    double tace_threshold = 1e-3;
    int tace_ranges = 10;

    void validate() const;
};

enum class BinningMode { Confidence, Uncertainty };

struct Bin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    double accuracy = 0.0;
    /// Mean max-class probability of the members.
    double confidence = 0.0;
    /// Mean normalized predictive entropy of the members.
    double uncertainty = 0.0;

    [[nodiscard]] double error() const noexcept { return 1.0 - accuracy; }
};

struct BinReport {
    BinningMode mode = BinningMode::Confidence;
    std::size_t total = 0;
    std::vector<Bin> bins;
};

/// Index of the equal-width bin holding `value` under the (lo, hi] rule, with 0 in bin 0.
std::size_t bin_index(double value, std::size_t num_bins) noexcept;

BinReport bin_stats(const ProbSet& probs, const MetricsConfig& cfg = {});
BinReport uncertainty_bin_stats(const ProbSet& probs, const MetricsConfig& cfg = {});

/// Throws WrongBinning for an uncertainty-binned report.
double ece(const BinReport& report);
double sce(const ProbSet& probs, const MetricsConfig& cfg = {});
double tace(const ProbSet& probs, const MetricsConfig& cfg = {});
double brier(const ProbSet& probs);
/// Normalized entropy H(p) / log N, clamped to [0, 1].
double predictive_uncertainty(std::span<const double> probs);
double uce(const ProbSet& probs, const MetricsConfig& cfg = {});
/// Mean -log max(p_y, 1e-12).
double prob_nll(const ProbSet& probs);

struct ReliabilityRow {
    double bin_lo;
    double bin_hi;
    std::size_t n;
    double acc;
    double conf;
    double gap;
    bool empty;
};

/// One row per bin, empty bins included. For uncertainty-binned reports `conf` holds the
/// mean uncertainty and `gap` is error minus uncertainty; otherwise gap = acc - conf.
std::vector<ReliabilityRow> reliability_rows(const BinReport& report);

struct ClassConfidenceRow {
    std::size_t class_index;
    std::int64_t count;
    double freq_normalized;
    /// Mean true-class probability over samples of this class; empty when none.
    std::optional<double> mean_confidence;
};

std::vector<ClassConfidenceRow> confidence_by_class(const ProbSet& probs,
                                                    const ClassFrequencyProfile& profile);

struct MetricReport {
    double acc = 0.0;
    double ece = 0.0;
    double sce = 0.0;
    double tace = 0.0;
    double brier = 0.0;
    double uce = 0.0;
    double nll = 0.0;
    MetricsConfig config;
};

/// Full metric suite. `nll_override` lets callers with logits pass the exact NLL.
MetricReport evaluate(const ProbSet& probs, const MetricsConfig& cfg = {},
                      std::optional<double> nll_override = std::nullopt);

}  // namespace cdacal
