#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "cdacal/calibrate.hpp"
#include "cdacal/datagen.hpp"
#include "cdacal/metrics.hpp"
#include "cdacal/model.hpp"

namespace cdacal {

/// End-to-end comparison run: generate data, train a baseline, fit TS on a
/// validation split, build the CDA vector from the training profile, and score
/// every requested method on a separate test split.
struct PipelineSpec {
    SyntheticSpec data;
    TrainConfig train;
    /// Share of the held-out split used for fitting temperatures; the rest is the test split.
    double val_fraction = 0.5;
    std::uint64_t split_seed = 7;
    TsFitConfig ts;
    double cda_gamma = 0.1;
    double ls_alpha = 0.1;
    double ls_gamma = 0.01;
    double sd_fixed_t = 4.0;
    double sd_lambda = 0.5;
    MetricsConfig metrics;
    std::vector<std::string> methods = {"Baseline", "TS", "CDA-TS"};
};

inline const std::vector<std::string> kKnownMethods = {
    "Baseline", "TS", "CDA-TS", "LS", "CDA-LS", "SD (4)", "SD Opt. T", "SD CDA Opt. T"};

PipelineSpec pipeline_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PipelineSpec& spec);

struct MethodResult {
    std::string method;
    MetricReport report;
    std::vector<ReliabilityRow> reliability;
    std::vector<ClassConfidenceRow> by_class;
};

struct PipelineResult {
    double t_opt = 1.0;
    std::vector<double> cda_temps;
    std::vector<std::int64_t> train_counts;
    std::size_t train_size = 0;
    std::size_t val_size = 0;
    std::size_t test_size = 0;
    std::vector<MethodResult> rows;

    [[nodiscard]] const MethodResult& row(const std::string& method) const;
};

PipelineResult run_pipeline(const PipelineSpec& spec);

/// Comparison table keyed by method name, one row per method.
nlohmann::json comparison_json(const PipelineSpec& spec, const PipelineResult& result);

}  // namespace cdacal
