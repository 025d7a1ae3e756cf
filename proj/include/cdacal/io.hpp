#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cdacal/calibrate.hpp"
#include "cdacal/core.hpp"
#include "cdacal/datagen.hpp"
#include "cdacal/metrics.hpp"
#include "cdacal/model.hpp"
#include "cdacal/smooth.hpp"

namespace cdacal::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum class MatrixFormat { Auto, Binary, Csv };
enum class DType { F32, F64 };

/// Binary matrix files are a triple sharing one stem: `<stem>.json` sidecar,
/// `<stem>.bin` little-endian payload and `<stem>.labels` newline-delimited labels.
/// Passing any of the three paths (or the bare stem) selects the triple.
struct BinaryPaths {
    fs::path sidecar;
    fs::path payload;
    fs::path labels;
};
BinaryPaths binary_paths(const fs::path& path);

MatrixFormat resolve_format(const fs::path& path, MatrixFormat format);

/// Scores plus labels as stored on disk; no probability or finiteness checks beyond parsing.
struct LabeledMatrix {
    Matrix values;
    std::vector<int> labels;
};

/// `kind` is recorded in the sidecar ("logits", "probs", "soft_labels").
void save_matrix(const fs::path& path, const Matrix& values, std::span<const int> labels,
                 MatrixFormat format, DType dtype, const std::string& kind);

/// Throws Parse errors naming the offending row, or byte counts on size mismatch.
LabeledMatrix load_matrix(const fs::path& path, MatrixFormat format = MatrixFormat::Auto);

LogitSet load_logits(const fs::path& path, MatrixFormat format = MatrixFormat::Auto);
void save_logits(const fs::path& path, const LogitSet& logits,
                 MatrixFormat format = MatrixFormat::Auto, DType dtype = DType::F64);

ProbSet load_probs(const fs::path& path, MatrixFormat format = MatrixFormat::Auto);
void save_probs(const fs::path& path, const ProbSet& probs,
                MatrixFormat format = MatrixFormat::Auto);

std::vector<int> read_labels(const fs::path& path);
void write_labels(const fs::path& path, std::span<const int> labels);

void save_dataset(const fs::path& path, const Dataset& data);
Dataset load_dataset(const fs::path& path);

struct TemperatureFile {
    double t_opt = 1.0;
    double gamma = 0.0;
    std::vector<double> temps;
    std::optional<std::vector<std::int64_t>> source_profile;
    /// Absolute path of the logit file the temperature was fitted on, when known.
    std::optional<std::string> fitted_on;
};
json to_json(const TemperatureFile& temps);
TemperatureFile temperature_file_from_json(const json& j);
void save_temperatures(const fs::path& path, const TemperatureFile& temps);
TemperatureFile load_temperatures(const fs::path& path);

/// Reads class counts from a JSON object: "train_counts" (dataset sidecars) wins over
/// "counts" (profile files), then "source_profile" (temperature files).
ClassFrequencyProfile load_profile(const fs::path& path);

json smoothing_json(double alpha, double gamma, const SmoothingVector& smoothing,
                    const std::vector<double>& row_sums);

json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const json& j, TrainConfig base = {});

void save_model(const fs::path& path, const LinearModel& model, const TrainConfig& cfg);
LinearModel load_model(const fs::path& path);

json to_json(const MetricsConfig& cfg);
json report_json(const MetricReport& report);

void write_reliability_csv(const fs::path& path, const std::vector<ReliabilityRow>& rows);
void write_by_class_csv(const fs::path& path, const std::vector<ClassConfidenceRow>& rows);
void write_trace_csv(const fs::path& path, const std::vector<EpochStats>& trace);

json read_json(const fs::path& path);
/// Pretty-printed with a trailing newline.
void write_json(const fs::path& path, const json& j);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace cdacal::io
