#pragma once

#include "cdacal/core.hpp"

namespace cdacal {

/// Grid line search over [t_min, t_max]. Each refinement round re-grids
/// +/- one previous step around the incumbent with the step shrunk by refine_factor.
struct TsFitConfig {
    double t_min = 0.05;
    double t_max = 10.0;
    int coarse_steps = 200;
    int refine_rounds = 3;
    double refine_factor = 0.1;

    void validate() const;
};

struct CdaConfig {
    double gamma = 0.1;

    void validate() const;
};

struct TemperatureFit {
    double t_opt = 1.0;
    double nll = 0.0;
    /// Every evaluated (T, NLL) pair, in evaluation order.
    std::vector<std::pair<double, double>> evaluated;
};

/// Scalar T minimizing mean NLL. Ties go to the smaller T.
TemperatureFit fit_temperature(const LogitSet& logits, const TsFitConfig& cfg = {});

double fit_optimal_temperature(const LogitSet& logits, const TsFitConfig& cfg = {});

/// t[i] = t_opt + gamma * f_i with f the max-normalized class frequencies.
TemperatureVector cda_temperature(double t_opt, const ClassFrequencyProfile& profile,
                                  const CdaConfig& cfg = {});

/// Divides every logit column by its class temperature, then applies softmax.
ProbSet apply_temperature(const LogitSet& logits, const TemperatureVector& temps);

}  // namespace cdacal
