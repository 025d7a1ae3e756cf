#include "cdacal/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cdacal {

void TsFitConfig::validate() const {
    if (!(t_min > 0.0 && t_min < t_max && std::isfinite(t_max))) {
        throw Error(ErrorKind::InvalidInput, "temperature search range must satisfy 0 < t_min < t_max");
    }
    if (coarse_steps < 10) throw Error(ErrorKind::InvalidInput, "coarse_steps must be >= 10");
    if (refine_rounds < 0) throw Error(ErrorKind::InvalidInput, "refine_rounds must be >= 0");
    if (!(refine_factor > 0.0 && refine_factor < 1.0)) {
        throw Error(ErrorKind::InvalidInput, "refine_factor must lie in (0, 1)");
    }
}

void CdaConfig::validate() const {
    if (!(std::isfinite(gamma) && gamma >= 0.0)) {
        throw Error(ErrorKind::InvalidInput, "gamma must be finite and non-negative");
    }
}

namespace {

// With one shared T the row maximum stays put, so the gaps to it are computed once.
// The leading term contributes exp(0) = 1 and is left out of the stored gaps.
class UniformNll {
public:
    explicit UniformNll(const LogitSet& logits)
        : rows_(logits.size()), width_(logits.num_classes() - 1), label_gap_(rows_) {
        gaps_.reserve(rows_ * width_);
        for (std::size_t i = 0; i < rows_; ++i) {
            const auto row = logits.values().row(i);
            const std::size_t top = argmax(row);
            for (std::size_t c = 0; c < row.size(); ++c) {
                if (c != top) gaps_.push_back(row[c] - row[top]);
            }
            label_gap_[i] = row[static_cast<std::size_t>(logits.labels()[i])] - row[top];
        }
    }

    double operator()(double t) const {
        const double inverse = 1.0 / t;
        double total = 0.0;
        const double* g = gaps_.data();
        for (std::size_t i = 0; i < rows_; ++i, g += width_) {
            double sum = 1.0;
            for (std::size_t c = 0; c < width_; ++c) sum += std::exp(g[c] * inverse);
            total += std::log(sum) - label_gap_[i] * inverse;
        }
        return total / static_cast<double>(rows_);
    }

private:
    std::size_t rows_;
    std::size_t width_;
    std::vector<double> gaps_;
    std::vector<double> label_gap_;
};

}  // namespace

TemperatureFit fit_temperature(const LogitSet& logits, const TsFitConfig& cfg) {
    cfg.validate();
    const UniformNll objective(logits);
    TemperatureFit fit;
    bool found = false;
    const auto consider = [&](double t) {
        const double value = objective(t);
        fit.evaluated.emplace_back(t, value);
        if (!std::isfinite(value)) return;
        // Strict comparison keeps the earlier (smaller) T on exact ties within a sweep.
        if (!found || value < fit.nll || (value == fit.nll && t < fit.t_opt)) {
            fit.t_opt = t;
            fit.nll = value;
            found = true;
        }
    };

    double step = (cfg.t_max - cfg.t_min) / static_cast<double>(cfg.coarse_steps - 1);
    for (int k = 0; k < cfg.coarse_steps; ++k) {
        consider(k + 1 == cfg.coarse_steps ? cfg.t_max : cfg.t_min + step * k);
    }
    if (!found) throw Error(ErrorKind::FitFailure, "NLL is non-finite across the whole grid");

    const int points = static_cast<int>(std::lround(2.0 / cfg.refine_factor));
    for (int round = 0; round < cfg.refine_rounds; ++round) {
        const double lo = std::max(cfg.t_min, fit.t_opt - step);
        const double hi = std::min(cfg.t_max, fit.t_opt + step);
        step *= cfg.refine_factor;
        for (int k = 0; k <= points; ++k) {
            const double t = lo + step * k;
            if (t > hi) break;
            consider(t);
        }
    }
    return fit;
}

double fit_optimal_temperature(const LogitSet& logits, const TsFitConfig& cfg) {
    return fit_temperature(logits, cfg).t_opt;
}

TemperatureVector cda_temperature(double t_opt, const ClassFrequencyProfile& profile,
                                  const CdaConfig& cfg) {
    cfg.validate();
    if (!(t_opt > 0.0 && std::isfinite(t_opt))) {
        throw Error(ErrorKind::InvalidTemperature, "t_opt must be positive");
    }
    std::vector<double> temps;
    temps.reserve(profile.num_classes());
    for (double f : profile.normalized()) temps.push_back(t_opt + cfg.gamma * f);
    return TemperatureVector(std::move(temps));
}

ProbSet apply_temperature(const LogitSet& logits, const TemperatureVector& temps) {
    if (temps.size() != logits.num_classes()) {
        throw Error(ErrorKind::Shape, "temperature vector has " + std::to_string(temps.size()) +
                                          " entries for " +
                                          std::to_string(logits.num_classes()) + " classes");
    }
    Matrix probs(logits.size(), logits.num_classes());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        softmax_into(logits.values().row(i), temps, probs.row(i));
    }
    const auto labels = logits.labels();
    return ProbSet(std::move(probs), std::vector<int>(labels.begin(), labels.end()));
}

}  // namespace cdacal
