#include "cdacal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cdacal/smooth.hpp"

namespace cdacal {

void MetricsConfig::validate() const {
    if (num_bins < 2) throw Error(ErrorKind::InvalidInput, "num_bins must be >= 2");
    if (!(tace_threshold >= 0.0 && tace_threshold < 1.0)) {
        throw Error(ErrorKind::InvalidInput, "tace_threshold must lie in [0, 1)");
    }
    if (tace_ranges < 1) throw Error(ErrorKind::InvalidInput, "tace_ranges must be >= 1");
}

std::size_t bin_index(double value, std::size_t num_bins) noexcept {
    if (!(value > 0.0)) return 0;
    const double b = static_cast<double>(num_bins);
    auto idx = static_cast<std::size_t>(std::clamp(std::ceil(value * b) - 1.0, 0.0, b - 1.0));
    // Nudge against rounding in value * b so the edges match k / num_bins exactly.
    while (idx > 0 && value <= static_cast<double>(idx) / b) --idx;
    while (idx + 1 < num_bins && value > static_cast<double>(idx + 1) / b) ++idx;
    return idx;
}

namespace {

BinReport binned(const ProbSet& probs, const MetricsConfig& cfg, BinningMode mode) {
    cfg.validate();
    const auto num_bins = static_cast<std::size_t>(cfg.num_bins);
    BinReport report;
    report.mode = mode;
    report.total = probs.size();
    report.bins.resize(num_bins);
    std::vector<double> correct(num_bins, 0.0);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const auto row = probs.values().row(i);
        const std::size_t pred = argmax(row);
        const double conf = row[pred];
        const double unc = predictive_uncertainty(row);
        const auto b = bin_index(mode == BinningMode::Confidence ? conf : unc, num_bins);
        auto& bin = report.bins[b];
        ++bin.count;
        bin.confidence += conf;
        bin.uncertainty += unc;
        if (pred == static_cast<std::size_t>(probs.labels()[i])) correct[b] += 1.0;
    }
    for (std::size_t b = 0; b < num_bins; ++b) {
        auto& bin = report.bins[b];
        bin.lo = static_cast<double>(b) / static_cast<double>(num_bins);
        bin.hi = static_cast<double>(b + 1) / static_cast<double>(num_bins);
        if (bin.count == 0) continue;
        const auto n = static_cast<double>(bin.count);
        bin.accuracy = correct[b] / n;
        bin.confidence /= n;
        bin.uncertainty /= n;
    }
    return report;
}

}  // namespace

BinReport bin_stats(const ProbSet& probs, const MetricsConfig& cfg) {
    return binned(probs, cfg, BinningMode::Confidence);
}

BinReport uncertainty_bin_stats(const ProbSet& probs, const MetricsConfig& cfg) {
    return binned(probs, cfg, BinningMode::Uncertainty);
}

double ece(const BinReport& report) {
    if (report.mode != BinningMode::Confidence) {
        throw Error(ErrorKind::WrongBinning, "ECE needs a confidence-binned report");
    }
    double total = 0.0;
    for (const auto& bin : report.bins) {
        if (bin.count == 0) continue;
        total += static_cast<double>(bin.count) / static_cast<double>(report.total) *
                 std::abs(bin.accuracy - bin.confidence);
    }
    return total;
}

double sce(const ProbSet& probs, const MetricsConfig& cfg) {
    cfg.validate();
    const auto num_bins = static_cast<std::size_t>(cfg.num_bins);
    const std::size_t n_classes = probs.num_classes();
    const auto m = static_cast<double>(probs.size());
    std::vector<std::size_t> count(num_bins);
    std::vector<double> hits(num_bins);
    std::vector<double> conf(num_bins);
    double total = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        std::fill(count.begin(), count.end(), 0);
        std::fill(hits.begin(), hits.end(), 0.0);
        std::fill(conf.begin(), conf.end(), 0.0);
        for (std::size_t i = 0; i < probs.size(); ++i) {
            const double p = probs.values()(i, c);
            const auto b = bin_index(p, num_bins);
            ++count[b];
            conf[b] += p;
            if (static_cast<std::size_t>(probs.labels()[i]) == c) hits[b] += 1.0;
        }
        for (std::size_t b = 0; b < num_bins; ++b) {
            if (count[b] == 0) continue;
            const auto n = static_cast<double>(count[b]);
            total += n / m * std::abs(hits[b] / n - conf[b] / n);
        }
    }
    return total / static_cast<double>(n_classes);
}

double tace(const ProbSet& probs, const MetricsConfig& cfg) {
    cfg.validate();
    const auto ranges = static_cast<std::size_t>(cfg.tace_ranges);
    double gap_sum = 0.0;
    std::size_t populated = 0;
    std::vector<std::size_t> members;
    for (std::size_t c = 0; c < probs.num_classes(); ++c) {
        members.clear();
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (probs.values()(i, c) >= cfg.tace_threshold) members.push_back(i);
        }
        std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
            return probs.values()(a, c) < probs.values()(b, c);
        });
        const std::size_t n = members.size();
        for (std::size_t r = 0; r < ranges; ++r) {
            const std::size_t begin = r * n / ranges;
            const std::size_t end = (r + 1) * n / ranges;
            if (begin == end) continue;
            double hits = 0.0;
            double conf = 0.0;
            for (std::size_t k = begin; k < end; ++k) {
                conf += probs.values()(members[k], c);
                if (static_cast<std::size_t>(probs.labels()[members[k]]) == c) hits += 1.0;
            }
            const auto size = static_cast<double>(end - begin);
            gap_sum += std::abs(hits / size - conf / size);
            ++populated;
        }
    }
    return populated == 0 ? 0.0 : gap_sum / static_cast<double>(populated);
}

double brier(const ProbSet& probs) {
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const auto row = probs.values().row(i);
        const auto y = static_cast<std::size_t>(probs.labels()[i]);
        double sample = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c) {
            const double d = row[c] - (c == y ? 1.0 : 0.0);
            sample += d * d;
        }
        total += sample;
    }
    return total / static_cast<double>(probs.size());
}

double predictive_uncertainty(std::span<const double> probs) {
    double entropy = 0.0;
    for (double p : probs) {
        if (p > 0.0) entropy -= p * std::log(p);
    }
    return std::clamp(entropy / std::log(static_cast<double>(probs.size())), 0.0, 1.0);
}

double uce(const ProbSet& probs, const MetricsConfig& cfg) {
    const auto report = uncertainty_bin_stats(probs, cfg);
    double total = 0.0;
    for (const auto& bin : report.bins) {
        if (bin.count == 0) continue;
        total += static_cast<double>(bin.count) / static_cast<double>(report.total) *
                 std::abs(bin.error() - bin.uncertainty);
    }
    return total;
}

double prob_nll(const ProbSet& probs) {
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const auto y = static_cast<std::size_t>(probs.labels()[i]);
        total -= std::log(std::max(probs.values()(i, y), kLogClamp));
    }
    return total / static_cast<double>(probs.size());
}

std::vector<ReliabilityRow> reliability_rows(const BinReport& report) {
    std::vector<ReliabilityRow> rows;
    rows.reserve(report.bins.size());
    for (const auto& bin : report.bins) {
        const bool empty = bin.count == 0;
        const double x = report.mode == BinningMode::Confidence ? bin.confidence : bin.uncertainty;
        const double y = report.mode == BinningMode::Confidence ? bin.accuracy : bin.error();
        rows.push_back({bin.lo, bin.hi, bin.count, empty ? 0.0 : bin.accuracy,
                        empty ? 0.0 : x, empty ? 0.0 : y - x, empty});
    }
    return rows;
}

std::vector<ClassConfidenceRow> confidence_by_class(const ProbSet& probs,
                                                    const ClassFrequencyProfile& profile) {
    const std::size_t n = probs.num_classes();
    if (profile.num_classes() != n) {
        throw Error(ErrorKind::Shape, "profile and probabilities disagree on class count");
    }
    std::vector<double> sums(n, 0.0);
    std::vector<std::size_t> members(n, 0);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const auto y = static_cast<std::size_t>(probs.labels()[i]);
        sums[y] += probs.values()(i, y);
        ++members[y];
    }
    std::vector<ClassConfidenceRow> rows;
    rows.reserve(n);
    for (std::size_t c = 0; c < n; ++c) {
        std::optional<double> mean;
        if (members[c] > 0) mean = sums[c] / static_cast<double>(members[c]);
        rows.push_back({c, profile.counts()[c], profile.normalized()[c], mean});
    }
    return rows;
}

MetricReport evaluate(const ProbSet& probs, const MetricsConfig& cfg,
                      std::optional<double> nll_override) {
    MetricReport report;
    report.config = cfg;
    report.acc = accuracy(probs);
    report.ece = ece(bin_stats(probs, cfg));
    report.sce = sce(probs, cfg);
    report.tace = tace(probs, cfg);
    report.brier = brier(probs);
    report.uce = uce(probs, cfg);
    report.nll = nll_override.value_or(prob_nll(probs));
    return report;
}

}  // namespace cdacal
