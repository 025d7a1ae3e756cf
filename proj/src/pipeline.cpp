#include "cdacal/pipeline.hpp"

#include <algorithm>

#include "cdacal/io.hpp"

namespace cdacal {

using nlohmann::json;

namespace {

MethodResult score(const std::string& method, const LogitSet& logits,
                   const TemperatureVector& temps, const ClassFrequencyProfile& profile,
                   const MetricsConfig& cfg) {
    const auto probs = apply_temperature(logits, temps);
    MethodResult out;
    out.method = method;
    out.report = evaluate(probs, cfg, nll(logits, temps));
    out.reliability = reliability_rows(bin_stats(probs, cfg));
    out.by_class = confidence_by_class(probs, profile);
    return out;
}

}  // namespace

PipelineSpec pipeline_spec_from_json(const json& j) {
    PipelineSpec spec;
    try {
        if (j.contains("data")) {
            const auto& d = j["data"];
            spec.data.num_classes = d.value("classes", spec.data.num_classes);
            spec.data.max_per_class = d.value("max_per_class", spec.data.max_per_class);
            spec.data.imbalance_ratio = d.value("ratio", spec.data.imbalance_ratio);
            spec.data.feature_dim = d.value("dim", spec.data.feature_dim);
            spec.data.class_separation = d.value("sep", spec.data.class_separation);
            spec.data.seed = d.value("seed", spec.data.seed);
            spec.data.held_out_fraction = d.value("held_out_fraction", spec.data.held_out_fraction);
            spec.data.balanced_held_out_per_class =
                d.value("balanced_held_out_per_class", spec.data.balanced_held_out_per_class);
        }
        if (j.contains("train")) spec.train = io::train_config_from_json(j["train"], spec.train);
        spec.val_fraction = j.value("val_fraction", spec.val_fraction);
        spec.split_seed = j.value("split_seed", spec.split_seed);
        if (j.contains("ts")) {
            const auto& t = j["ts"];
            spec.ts.t_min = t.value("t_min", spec.ts.t_min);
            spec.ts.t_max = t.value("t_max", spec.ts.t_max);
            spec.ts.coarse_steps = t.value("steps", spec.ts.coarse_steps);
            spec.ts.refine_rounds = t.value("refine_rounds", spec.ts.refine_rounds);
            spec.ts.refine_factor = t.value("refine_factor", spec.ts.refine_factor);
        }
        spec.cda_gamma = j.value("cda_gamma", spec.cda_gamma);
        spec.ls_alpha = j.value("ls_alpha", spec.ls_alpha);
        spec.ls_gamma = j.value("ls_gamma", spec.ls_gamma);
        spec.sd_fixed_t = j.value("sd_fixed_t", spec.sd_fixed_t);
        spec.sd_lambda = j.value("sd_lambda", spec.sd_lambda);
        if (j.contains("metrics")) {
            const auto& m = j["metrics"];
            spec.metrics.num_bins = m.value("num_bins", spec.metrics.num_bins);
            spec.metrics.tace_threshold = m.value("tace_threshold", spec.metrics.tace_threshold);
            spec.metrics.tace_ranges = m.value("tace_ranges", spec.metrics.tace_ranges);
        }
        if (j.contains("methods")) spec.methods = j["methods"].get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("pipeline spec: ") + e.what());
    }
    for (const auto& m : spec.methods) {
        if (std::find(kKnownMethods.begin(), kKnownMethods.end(), m) == kKnownMethods.end()) {
            throw Error(ErrorKind::InvalidSpec, "unknown method '" + m + "'");
        }
    }
    return spec;
}

json to_json(const PipelineSpec& spec) {
    return {
        {"data",
         {{"classes", spec.data.num_classes},
          {"max_per_class", spec.data.max_per_class},
          {"ratio", spec.data.imbalance_ratio},
          {"dim", spec.data.feature_dim},
          {"sep", spec.data.class_separation},
          {"seed", spec.data.seed},
          {"held_out_fraction", spec.data.held_out_fraction},
          {"balanced_held_out_per_class", spec.data.balanced_held_out_per_class}}},
        {"train", io::to_json(spec.train)},
        {"val_fraction", spec.val_fraction},
        {"split_seed", spec.split_seed},
        {"ts",
         {{"t_min", spec.ts.t_min},
          {"t_max", spec.ts.t_max},
          {"steps", spec.ts.coarse_steps},
          {"refine_rounds", spec.ts.refine_rounds},
          {"refine_factor", spec.ts.refine_factor}}},
        {"cda_gamma", spec.cda_gamma},
        {"ls_alpha", spec.ls_alpha},
        {"ls_gamma", spec.ls_gamma},
        {"sd_fixed_t", spec.sd_fixed_t},
        {"sd_lambda", spec.sd_lambda},
        {"metrics", io::to_json(spec.metrics)},
        {"methods", spec.methods},
    };
}

const MethodResult& PipelineResult::row(const std::string& method) const {
    for (const auto& r : rows) {
        if (r.method == method) return r;
    }
    throw Error(ErrorKind::InvalidInput, "no result row for method '" + method + "'");
}

PipelineResult run_pipeline(const PipelineSpec& spec) {
    const Dataset data = sample_gaussian_mixture(spec.data);
    const Samples train_split = data.train();
    auto [val_split, test_split] =
        stratified_split(data.held_out_samples(), 1.0 - spec.val_fraction, spec.split_seed);
    if (val_split.size() == 0 || test_split.size() == 0) {
        throw Error(ErrorKind::InvalidSpec, "validation or test split is empty");
    }
    const auto profile = frequency_profile(train_split.labels, train_split.num_classes);
    const std::size_t n = spec.data.num_classes;
    const auto unit = TemperatureVector::uniform(n, 1.0);

    PipelineResult result;
    result.train_counts.assign(profile.counts().begin(), profile.counts().end());
    result.train_size = train_split.size();
    result.val_size = val_split.size();
    result.test_size = test_split.size();

    TrainConfig base_cfg = spec.train;
    base_cfg.loss = LossMode{};
    const auto baseline = train(train_split, base_cfg).model;
    const auto test_logits = forward(baseline, test_split);
    result.t_opt = fit_optimal_temperature(forward(baseline, val_split), spec.ts);
    const auto scalar = TemperatureVector::uniform(n, result.t_opt);
    const auto cda = cda_temperature(result.t_opt, profile, CdaConfig{spec.cda_gamma});
    result.cda_temps.assign(cda.values().begin(), cda.values().end());

    const auto add = [&](const std::string& method, const LogitSet& logits,
                         const TemperatureVector& temps) {
        result.rows.push_back(score(method, logits, temps, profile, spec.metrics));
    };

    for (const auto& method : spec.methods) {
        if (method == "Baseline") {
            add(method, test_logits, unit);
        } else if (method == "TS") {
            add(method, test_logits, scalar);
        } else if (method == "CDA-TS") {
            add(method, test_logits, cda);
        } else if (method == "LS" || method == "CDA-LS") {
            TrainConfig cfg = spec.train;
            cfg.loss = method == "LS" ? LossMode{LossKind::LS, spec.ls_alpha, 0.0}
                                      : LossMode{LossKind::CdaLs, spec.ls_alpha, spec.ls_gamma};
            add(method, forward(train(train_split, cfg).model, test_split), unit);
        } else {
            DistillConfig cfg{method == "SD (4)"      ? TemperatureVector::uniform(n, spec.sd_fixed_t)
                              : method == "SD Opt. T" ? scalar
                                                      : cda,
                              spec.sd_lambda, spec.train};
            cfg.train.loss = LossMode{};
            add(method, forward(self_distill(baseline, train_split, cfg).model, test_split), unit);
        }
    }
    return result;
}

json comparison_json(const PipelineSpec& spec, const PipelineResult& result) {
    json rows = json::array();
    for (const auto& r : result.rows) {
        json row = io::report_json(r.report);
        row.erase("schema_version");
        row.erase("config");
        row["method"] = r.method;
        json by_class = json::array();
        for (const auto& c : r.by_class) {
            by_class.push_back(c.mean_confidence ? json(*c.mean_confidence) : json(nullptr));
        }
        row["mean_confidence_by_class"] = by_class;
        rows.push_back(row);
    }
    return {
        {"schema_version", io::kSchemaVersion},
        {"spec", to_json(spec)},
        {"t_opt", result.t_opt},
        {"cda_temps", result.cda_temps},
        {"train_counts", result.train_counts},
        {"sizes",
         {{"train", result.train_size}, {"val", result.val_size}, {"test", result.test_size}}},
        {"columns", {"acc", "ece", "sce", "tace", "brier", "uce", "nll"}},
        {"rows", rows},
    };
}

}  // namespace cdacal
