// Command-line front end for the calibration toolkit.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
// Diagnostics go to stderr; machine output goes to files only.

#include <cctype>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "cdacal/calibrate.hpp"
#include "cdacal/datagen.hpp"
#include "cdacal/io.hpp"
#include "cdacal/metrics.hpp"
#include "cdacal/model.hpp"
#include "cdacal/pipeline.hpp"
#include "cdacal/smooth.hpp"

namespace fs = std::filesystem;
using namespace cdacal;

namespace {

io::MatrixFormat parse_format(const std::string& name) {
    if (name == "auto") return io::MatrixFormat::Auto;
    if (name == "bin") return io::MatrixFormat::Binary;
    if (name == "csv") return io::MatrixFormat::Csv;
    throw Error(ErrorKind::Usage, "unknown format '" + name + "'");
}

io::DType parse_dtype(const std::string& name) {
    if (name == "f32") return io::DType::F32;
    if (name == "f64") return io::DType::F64;
    throw Error(ErrorKind::Usage, "unknown dtype '" + name + "'");
}

std::string canonical_path(const fs::path& path) {
    std::error_code ec;
    auto resolved = fs::weakly_canonical(io::binary_paths(path).sidecar, ec);
    if (path.extension() == ".csv") resolved = fs::weakly_canonical(path, ec);
    return ec ? path.string() : resolved.string();
}

// Refuses to evaluate on the split a temperature was fitted on.
void check_split(const io::TemperatureFile& temps, const fs::path& eval_path, bool allow_same) {
    if (allow_same || !temps.fitted_on) return;
    if (*temps.fitted_on == canonical_path(eval_path)) {
        throw Error(ErrorKind::Usage, "temperatures were fitted on " + eval_path.string() +
                                          "; pass --allow-same-split to evaluate on it anyway");
    }
}

TemperatureVector temps_for(const io::TemperatureFile& file, std::size_t num_classes) {
    if (file.temps.size() != num_classes) {
        throw Error(ErrorKind::Shape, "temperature file has " + std::to_string(file.temps.size()) +
                                          " entries for " + std::to_string(num_classes) +
                                          " classes");
    }
    return TemperatureVector(file.temps);
}

Samples part_of(const Dataset& data, const std::string& part) {
    if (part == "train") return data.train();
    if (part == "held-out") return data.held_out_samples();
    if (part == "all") return Samples{data.features, data.labels, data.num_classes};
    throw Error(ErrorKind::Usage, "unknown part '" + part + "'");
}

LossMode loss_mode(const std::string& name, double alpha, double gamma) {
    if (name == "ce") return {LossKind::CE, 0.0, 0.0};
    if (name == "ls") return {LossKind::LS, alpha, 0.0};
    if (name == "cda-ls") return {LossKind::CdaLs, alpha, gamma};
    throw Error(ErrorKind::Usage, "unknown loss '" + name + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Class-distribution-aware calibration toolkit"};
    app.require_subcommand(1);

    // gen-data
    SyntheticSpec synth;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic long-tailed dataset");
    gen->add_option("--classes", synth.num_classes)->required();
    gen->add_option("--max-per-class", synth.max_per_class)->required();
    gen->add_option("--ratio", synth.imbalance_ratio)->required();
    gen->add_option("--dim", synth.feature_dim)->required();
    gen->add_option("--sep", synth.class_separation)->required();
    gen->add_option("--seed", synth.seed)->required();
    gen->add_option("--held-out-fraction", synth.held_out_fraction);
    gen->add_option("--balanced-held-out", synth.balanced_held_out_per_class,
                    "Draw a class-balanced held-out set with this many samples per class");
    gen->add_option("--out", gen_out, "Output stem (<stem>.json/.bin/.labels)")->required();

    // export-logits
    std::string export_model, export_data, export_part = "held-out", export_out;
    std::string export_format = "auto", export_dtype = "f64";
    auto* exp = app.add_subcommand("export-logits", "Run a model over a dataset split");
    exp->add_option("--model", export_model)->required();
    exp->add_option("--data", export_data)->required();
    exp->add_option("--part", export_part, "train | held-out | all");
    exp->add_option("--out", export_out)->required();
    exp->add_option("--format", export_format, "auto | bin | csv");
    exp->add_option("--dtype", export_dtype, "f32 | f64");

    // fit-ts
    std::string fit_val, fit_out, fit_format = "auto";
    TsFitConfig fit_cfg;
    auto* fit = app.add_subcommand("fit-ts", "Fit the optimal scalar temperature by line search");
    fit->add_option("--val-logits", fit_val)->required();
    fit->add_option("--out-temps", fit_out)->required();
    fit->add_option("--t-min", fit_cfg.t_min);
    fit->add_option("--t-max", fit_cfg.t_max);
    fit->add_option("--steps", fit_cfg.coarse_steps);
    fit->add_option("--refine-rounds", fit_cfg.refine_rounds);
    fit->add_option("--refine-factor", fit_cfg.refine_factor);
    fit->add_option("--format", fit_format);

    // cda-temps
    std::string cda_in, cda_profile, cda_out;
    CdaConfig cda_cfg;
    auto* cda = app.add_subcommand("cda-temps", "Build the class-distribution-aware temperature vector");
    cda->add_option("--temps", cda_in)->required();
    cda->add_option("--profile", cda_profile, "JSON with class counts (dataset sidecar or profile)")
        ->required();
    cda->add_option("--gamma", cda_cfg.gamma);
    cda->add_option("--out", cda_out)->required();

    // apply-ts
    std::string apply_logits, apply_temps, apply_out, apply_format = "auto";
    bool apply_same = false;
    auto* apply = app.add_subcommand("apply-ts", "Apply a temperature vector to logits");
    apply->add_option("--logits", apply_logits)->required();
    apply->add_option("--temps", apply_temps)->required();
    apply->add_option("--out-probs", apply_out)->required();
    apply->add_option("--format", apply_format);
    apply->add_flag("--allow-same-split", apply_same);

    // smooth-labels
    std::string smooth_labels_path, smooth_out, smooth_targets, smooth_profile;
    std::size_t smooth_classes = 0;
    double smooth_alpha = 0.1;
    double smooth_gamma = 0.0;
    bool smooth_renorm = false;
    auto* smooth = app.add_subcommand("smooth-labels", "Build LS / CDA-LS soft labels");
    smooth->add_option("--labels", smooth_labels_path)->required();
    smooth->add_option("--classes", smooth_classes)->required();
    smooth->add_option("--alpha", smooth_alpha);
    smooth->add_option("--gamma", smooth_gamma, "0 gives plain LS; 0.01 is the usual CDA-LS value");
    smooth->add_option("--profile", smooth_profile, "Class counts JSON (defaults to label tally)");
    smooth->add_flag("--renormalize", smooth_renorm, "Divide each soft-label row by its sum");
    smooth->add_option("--out", smooth_out, "Smoothing vector JSON")->required();
    smooth->add_option("--out-targets", smooth_targets, "Soft-label matrix (bin stem or .csv)");

    // metrics
    std::string met_probs, met_logits, met_temps, met_report, met_rel, met_by_class, met_profile;
    std::string met_format = "auto";
    MetricsConfig met_cfg;
    bool met_same = false;
    auto* met = app.add_subcommand("metrics", "Compute ACC/ECE/SCE/TACE/BS/UCE/NLL");
    auto* probs_opt = met->add_option("--probs", met_probs);
    auto* logits_opt = met->add_option("--logits", met_logits);
    probs_opt->excludes(logits_opt);
    met->add_option("--temps", met_temps)->excludes(probs_opt);
    met->add_option("--report", met_report)->required();
    met->add_option("--reliability", met_rel);
    met->add_option("--by-class", met_by_class);
    met->add_option("--profile", met_profile, "Class counts JSON for --by-class");
    met->add_option("--bins", met_cfg.num_bins);
    met->add_option("--tace-threshold", met_cfg.tace_threshold);
    met->add_option("--tace-ranges", met_cfg.tace_ranges);
    met->add_option("--format", met_format);
    met->add_flag("--allow-same-split", met_same);

    // train
    std::string train_data, train_loss = "ce", train_config, train_out, train_trace;
    double train_alpha = 0.1, train_gamma = 0.01;
    auto* tr = app.add_subcommand("train", "Train the desk-scale classifier");
    tr->add_option("--data", train_data)->required();
    tr->add_option("--loss", train_loss, "ce | ls | cda-ls");
    tr->add_option("--alpha", train_alpha);
    tr->add_option("--gamma", train_gamma);
    tr->add_option("--config", train_config, "TrainConfig JSON");
    tr->add_option("--out-model", train_out)->required();
    tr->add_option("--trace", train_trace, "Per-epoch CSV");

    // distill
    std::string dist_teacher, dist_data, dist_temps, dist_config, dist_out, dist_trace;
    double dist_lambda = 0.5;
    auto* dist = app.add_subcommand("distill", "Self-distillation with a temperature vector");
    dist->add_option("--teacher", dist_teacher)->required();
    dist->add_option("--data", dist_data)->required();
    dist->add_option("--temps", dist_temps)->required();
    dist->add_option("--lambda", dist_lambda);
    dist->add_option("--config", dist_config);
    dist->add_option("--out-model", dist_out)->required();
    dist->add_option("--trace", dist_trace);

    // pipeline
    std::string pipe_spec, pipe_out = "comparison.json", pipe_dir;
    auto* pipe = app.add_subcommand("pipeline", "gen-data -> train -> fit-ts -> cda-temps -> metrics");
    pipe->add_option("--spec", pipe_spec)->required();
    pipe->add_option("--out", pipe_out);
    pipe->add_option("--out-dir", pipe_dir, "Also write reliability and by-class CSVs per method");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*gen) {
            io::save_dataset(gen_out, sample_gaussian_mixture(synth));
        } else if (*exp) {
            const auto model = io::load_model(export_model);
            const auto data = io::load_dataset(export_data);
            const auto logits = forward(model, part_of(data, export_part));
            io::save_logits(export_out, logits, parse_format(export_format),
                            parse_dtype(export_dtype));
        } else if (*fit) {
            const auto logits = io::load_logits(fit_val, parse_format(fit_format));
            io::TemperatureFile out;
            out.t_opt = fit_optimal_temperature(logits, fit_cfg);
            out.temps.assign(logits.num_classes(), out.t_opt);
            out.fitted_on = canonical_path(fit_val);
            io::save_temperatures(fit_out, out);
        } else if (*cda) {
            auto file = io::load_temperatures(cda_in);
            const auto profile = io::load_profile(cda_profile);
            const auto temps = cda_temperature(file.t_opt, profile, cda_cfg);
            file.gamma = cda_cfg.gamma;
            file.temps.assign(temps.values().begin(), temps.values().end());
            file.source_profile.emplace(profile.counts().begin(), profile.counts().end());
            io::save_temperatures(cda_out, file);
        } else if (*apply) {
            const auto logits = io::load_logits(apply_logits, parse_format(apply_format));
            const auto file = io::load_temperatures(apply_temps);
            check_split(file, apply_logits, apply_same);
            io::save_probs(apply_out,
                           apply_temperature(logits, temps_for(file, logits.num_classes())));
        } else if (*smooth) {
            auto labels = io::read_labels(smooth_labels_path);
            const auto profile = smooth_profile.empty()
                                     ? frequency_profile(labels, smooth_classes)
                                     : io::load_profile(smooth_profile);
            if (profile.num_classes() != smooth_classes) {
                throw Error(ErrorKind::Shape, "profile class count does not match --classes");
            }
            const auto vec = cda_alpha(smooth_alpha, profile, smooth_gamma);
            const auto targets = soft_labels(labels, vec, smooth_classes, smooth_renorm);
            auto j = io::smoothing_json(smooth_alpha, smooth_gamma, vec, targets.row_sums);
            j["renormalized"] = smooth_renorm;
            io::write_json(smooth_out, j);
            if (!smooth_targets.empty()) {
                io::save_matrix(smooth_targets, targets.values, labels, io::MatrixFormat::Auto,
                                io::DType::F64, "soft_labels");
            }
        } else if (*met) {
            if (met_probs.empty() && met_logits.empty()) {
                throw Error(ErrorKind::Usage, "metrics needs one of --probs or --logits");
            }
            std::optional<ProbSet> probs;
            std::optional<double> exact_nll;
            if (!met_logits.empty()) {
                const auto logits = io::load_logits(met_logits, parse_format(met_format));
                auto temps = TemperatureVector::uniform(logits.num_classes(), 1.0);
                if (!met_temps.empty()) {
                    const auto file = io::load_temperatures(met_temps);
                    check_split(file, met_logits, met_same);
                    temps = temps_for(file, logits.num_classes());
                }
                probs.emplace(apply_temperature(logits, temps));
                exact_nll = nll(logits, temps);
            } else {
                probs.emplace(io::load_probs(met_probs, parse_format(met_format)));
            }
            met_cfg.validate();
            const auto report = evaluate(*probs, met_cfg, exact_nll);
            io::write_json(met_report, io::report_json(report));
            if (!met_rel.empty()) {
                io::write_reliability_csv(met_rel, reliability_rows(bin_stats(*probs, met_cfg)));
            }
            if (!met_by_class.empty()) {
                const auto profile =
                    met_profile.empty()
                        ? frequency_profile(probs->labels(), probs->num_classes())
                        : io::load_profile(met_profile);
                io::write_by_class_csv(met_by_class, confidence_by_class(*probs, profile));
            }
        } else if (*tr) {
            const auto data = io::load_dataset(train_data);
            auto cfg = train_config.empty() ? TrainConfig{}
                                            : io::train_config_from_json(io::read_json(train_config));
            cfg.loss = loss_mode(train_loss, train_alpha, train_gamma);
            const auto held = data.held_out_samples();
            const auto result = train(data.train(), cfg, held.size() > 0 ? &held : nullptr);
            io::save_model(train_out, result.model, cfg);
            if (!train_trace.empty()) io::write_trace_csv(train_trace, result.trace);
        } else if (*dist) {
            const auto teacher = io::load_model(dist_teacher);
            const auto data = io::load_dataset(dist_data);
            const auto file = io::load_temperatures(dist_temps);
            DistillConfig cfg{temps_for(file, data.num_classes), dist_lambda,
                              dist_config.empty()
                                  ? TrainConfig{}
                                  : io::train_config_from_json(io::read_json(dist_config))};
            cfg.train.loss = LossMode{};
            const auto held = data.held_out_samples();
            const auto result =
                self_distill(teacher, data.train(), cfg, held.size() > 0 ? &held : nullptr);
            io::save_model(dist_out, result.model, cfg.train);
            if (!dist_trace.empty()) io::write_trace_csv(dist_trace, result.trace);
        } else if (*pipe) {
            const auto spec = pipeline_spec_from_json(io::read_json(pipe_spec));
            const auto result = run_pipeline(spec);
            io::write_json(pipe_out, comparison_json(spec, result));
            if (!pipe_dir.empty()) {
                fs::create_directories(pipe_dir);
                for (const auto& row : result.rows) {
                    std::string name;
                    for (char ch : row.method) {
                        name += std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_';
                    }
                    const fs::path dir(pipe_dir);
                    io::write_reliability_csv(dir / (name + ".reliability.csv"), row.reliability);
                    io::write_by_class_csv(dir / (name + ".by_class.csv"), row.by_class);
                }
            }
        }
    } catch (const Error& e) {
        std::cerr << "cdacal: " << to_string(e.kind()) << " error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "cdacal: error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
