#include "cdacal/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cdacal::io {

namespace {

Error parse_error(const std::string& message) { return Error(ErrorKind::Parse, message); }

template <typename T>
T from_little_endian(const char* bytes) {
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        char* raw = reinterpret_cast<char*>(&value);
        std::reverse(raw, raw + sizeof(T));
    }
    return value;
}

template <typename T>
void append_little_endian(std::string& out, T value) {
    char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    out.append(raw, sizeof(T));
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw parse_error("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const fs::path& path, const std::string& contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorKind::InvalidInput, "failed writing " + path.string());
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

template <typename T>
T parse_number(std::string_view text, const std::string& where) {
    text = trim(text);
    T value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end || text.empty()) {
        throw parse_error("cannot parse '" + std::string(text) + "' " + where);
    }
    return value;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

std::string column_prefix(const std::string& kind) {
    if (kind == "probs") return "p_";
    if (kind == "soft_labels") return "target_";
    return "logit_";
}

std::size_t require_size(const json& j, const char* key, const fs::path& path) {
    if (!j.contains(key) || !j[key].is_number_unsigned()) {
        throw parse_error(path.string() + ": missing non-negative integer '" + key + "'");
    }
    return j[key].get<std::size_t>();
}

// Decodes a little-endian payload of rows x cols values of the given width.
std::vector<double> decode_payload(const std::string& bytes, std::size_t rows, std::size_t cols,
                                   DType dtype, const fs::path& path) {
    const std::size_t width = dtype == DType::F32 ? 4 : 8;
    const std::size_t expected = rows * cols * width;
    if (bytes.size() != expected) {
        throw parse_error(path.string() + ": payload has " + std::to_string(bytes.size()) +
                          " bytes, expected " + std::to_string(expected) + " (" +
                          std::to_string(rows) + " x " + std::to_string(cols) + " x " +
                          std::to_string(width) + ")");
    }
    std::vector<double> values(rows * cols);
    for (std::size_t k = 0; k < values.size(); ++k) {
        const char* at = bytes.data() + k * width;
        values[k] = dtype == DType::F32 ? static_cast<double>(from_little_endian<float>(at))
                                        : from_little_endian<double>(at);
    }
    return values;
}

std::string encode_payload(std::span<const double> values, DType dtype) {
    std::string bytes;
    bytes.reserve(values.size() * (dtype == DType::F32 ? 4 : 8));
    for (double v : values) {
        if (dtype == DType::F32) {
            append_little_endian(bytes, static_cast<float>(v));
        } else {
            append_little_endian(bytes, v);
        }
    }
    return bytes;
}

DType parse_dtype(const json& j, const fs::path& path) {
    const auto dtype = j.value("dtype", std::string("f64"));
    if (dtype == "f32") return DType::F32;
    if (dtype == "f64") return DType::F64;
    throw parse_error(path.string() + ": unknown dtype '" + dtype + "'");
}

LabeledMatrix load_csv(const fs::path& path) {
    const auto text = read_file(path);
    const auto lines = split_lines(text);
    if (lines.empty() || trim(lines.front()).empty()) throw parse_error(path.string() + ": empty file");
    const auto header = split_commas(lines.front());
    if (trim(header.front()) != "label" || header.size() < 2) {
        throw parse_error(path.string() + ": header must start with 'label' followed by class columns");
    }
    const std::size_t cols = header.size() - 1;
    std::vector<double> values;
    std::vector<int> labels;
    for (std::size_t l = 1; l < lines.size(); ++l) {
        if (trim(lines[l]).empty()) continue;
        const std::string where = "at " + path.string() + " row " + std::to_string(labels.size());
        const auto fields = split_commas(lines[l]);
        if (fields.size() != cols + 1) {
            throw parse_error("expected " + std::to_string(cols + 1) + " fields, got " +
                              std::to_string(fields.size()) + " " + where);
        }
        const int label = parse_number<int>(fields[0], where);
        if (label < 0 || static_cast<std::size_t>(label) >= cols) {
            throw parse_error("label " + std::to_string(label) + " out of range [0, " +
                              std::to_string(cols) + ") " + where);
        }
        labels.push_back(label);
        for (std::size_t c = 1; c <= cols; ++c) {
            const double v = parse_number<double>(fields[c], where);
            if (!std::isfinite(v)) throw parse_error("non-finite value " + where);
            values.push_back(v);
        }
    }
    if (labels.empty()) throw parse_error(path.string() + ": no data rows");
    return {Matrix(labels.size(), cols, std::move(values)), std::move(labels)};
}

LabeledMatrix load_binary(const fs::path& path) {
    const auto paths = binary_paths(path);
    const auto header = read_json(paths.sidecar);
    const std::size_t rows = require_size(header, "m", paths.sidecar);
    const std::size_t cols = require_size(header, "n_classes", paths.sidecar);
    if (header.value("layout", std::string("row-major")) != "row-major") {
        throw parse_error(paths.sidecar.string() + ": only row-major layout is supported");
    }
    const auto dtype = parse_dtype(header, paths.sidecar);
    if (rows == 0) throw parse_error(paths.sidecar.string() + ": no data rows (m = 0)");
    auto values = decode_payload(read_file(paths.payload), rows, cols, dtype, paths.payload);
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (!std::isfinite(values[k])) {
            throw parse_error("non-finite value at " + paths.payload.string() + " row " +
                              std::to_string(k / cols));
        }
    }
    auto labels = read_labels(paths.labels);
    if (labels.size() != rows) {
        throw parse_error(paths.labels.string() + ": has " + std::to_string(labels.size()) +
                          " labels, expected " + std::to_string(rows));
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= cols) {
            throw parse_error("label " + std::to_string(labels[i]) + " out of range [0, " +
                              std::to_string(cols) + ") at " + paths.labels.string() + " row " +
                              std::to_string(i));
        }
    }
    return {Matrix(rows, cols, std::move(values)), std::move(labels)};
}

}  // namespace

std::string format_double(double value) {
    char buffer[64];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, ptr);
}

BinaryPaths binary_paths(const fs::path& path) {
    fs::path stem = path;
    const auto ext = path.extension();
    if (ext == ".json" || ext == ".bin" || ext == ".labels") stem.replace_extension();
    const auto with = [&](const char* suffix) {
        fs::path p = stem;
        p += suffix;
        return p;
    };
    return {with(".json"), with(".bin"), with(".labels")};
}

MatrixFormat resolve_format(const fs::path& path, MatrixFormat format) {
    if (format != MatrixFormat::Auto) return format;
    return path.extension() == ".csv" ? MatrixFormat::Csv : MatrixFormat::Binary;
}

json read_json(const fs::path& path) {
    const auto text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw parse_error(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

std::vector<int> read_labels(const fs::path& path) {
    const auto text = read_file(path);
    std::vector<int> labels;
    for (const auto line : split_lines(text)) {
        if (trim(line).empty()) continue;
        labels.push_back(parse_number<int>(
            line, "at " + path.string() + " row " + std::to_string(labels.size())));
    }
    return labels;
}

void write_labels(const fs::path& path, std::span<const int> labels) {
    std::string out;
    for (int label : labels) {
        out += std::to_string(label);
        out += '\n';
    }
    write_file(path, out);
}

void save_matrix(const fs::path& path, const Matrix& values, std::span<const int> labels,
                 MatrixFormat format, DType dtype, const std::string& kind) {
    if (labels.size() != values.rows()) {
        throw Error(ErrorKind::Shape, "label count does not match matrix rows");
    }
    if (resolve_format(path, format) == MatrixFormat::Csv) {
        std::string out = "label";
        const auto prefix = column_prefix(kind);
        for (std::size_t c = 0; c < values.cols(); ++c) out += "," + prefix + std::to_string(c);
        out += '\n';
        for (std::size_t i = 0; i < values.rows(); ++i) {
            out += std::to_string(labels[i]);
            for (double v : values.row(i)) {
                out += ',';
                out += format_double(dtype == DType::F32 ? static_cast<double>(static_cast<float>(v)) : v);
            }
            out += '\n';
        }
        write_file(path, out);
        return;
    }
    const auto paths = binary_paths(path);
    json header = {
        {"schema_version", kSchemaVersion},
        {"kind", kind},
        {"m", values.rows()},
        {"n_classes", values.cols()},
        {"dtype", dtype == DType::F32 ? "f32" : "f64"},
        {"layout", "row-major"},
        {"payload", paths.payload.filename().string()},
        {"labels", paths.labels.filename().string()},
    };
    write_file(paths.payload, encode_payload(values.data(), dtype));
    write_labels(paths.labels, labels);
    write_json(paths.sidecar, header);
}

LabeledMatrix load_matrix(const fs::path& path, MatrixFormat format) {
    return resolve_format(path, format) == MatrixFormat::Csv ? load_csv(path) : load_binary(path);
}

LogitSet load_logits(const fs::path& path, MatrixFormat format) {
    auto raw = load_matrix(path, format);
    return LogitSet(std::move(raw.values), std::move(raw.labels));
}

void save_logits(const fs::path& path, const LogitSet& logits, MatrixFormat format, DType dtype) {
    save_matrix(path, logits.values(), logits.labels(), format, dtype, "logits");
}

ProbSet load_probs(const fs::path& path, MatrixFormat format) {
    auto raw = load_matrix(path, format);
    return ProbSet(std::move(raw.values), std::move(raw.labels));
}

void save_probs(const fs::path& path, const ProbSet& probs, MatrixFormat format) {
    save_matrix(path, probs.values(), probs.labels(), format, DType::F64, "probs");
}

void save_dataset(const fs::path& path, const Dataset& data) {
    const auto paths = binary_paths(path);
    std::vector<std::size_t> held_out;
    for (std::size_t i = 0; i < data.held_out.size(); ++i) {
        if (data.held_out[i] != 0) held_out.push_back(i);
    }
    const auto counts = data.profile.counts();
    const auto train_profile = data.train_profile();
    const auto train_counts = train_profile.counts();
    json header = {
        {"schema_version", kSchemaVersion},
        {"kind", "dataset"},
        {"m", data.labels.size()},
        {"d", data.features.cols()},
        {"n_classes", data.num_classes},
        {"seed", data.seed},
        {"counts", std::vector<std::int64_t>(counts.begin(), counts.end())},
        {"train_counts", std::vector<std::int64_t>(train_counts.begin(), train_counts.end())},
        {"dtype", "f32"},
        {"layout", "row-major"},
        {"payload", paths.payload.filename().string()},
        {"labels", paths.labels.filename().string()},
        {"held_out", held_out},
    };
    write_file(paths.payload, encode_payload(data.features.data(), DType::F32));
    write_labels(paths.labels, data.labels);
    write_json(paths.sidecar, header);
}

Dataset load_dataset(const fs::path& path) {
    const auto paths = binary_paths(path);
    const auto header = read_json(paths.sidecar);
    const std::size_t rows = require_size(header, "m", paths.sidecar);
    const std::size_t dim = require_size(header, "d", paths.sidecar);
    const std::size_t classes = require_size(header, "n_classes", paths.sidecar);
    Dataset data;
    data.num_classes = classes;
    data.seed = header.value("seed", std::uint64_t{0});
    data.features = Matrix(rows, dim, decode_payload(read_file(paths.payload), rows, dim,
                                                     parse_dtype(header, paths.sidecar),
                                                     paths.payload));
    data.labels = read_labels(paths.labels);
    if (data.labels.size() != rows) {
        throw parse_error(paths.labels.string() + ": has " + std::to_string(data.labels.size()) +
                          " labels, expected " + std::to_string(rows));
    }
    data.held_out.assign(rows, 0);
    if (header.contains("held_out")) {
        for (const auto& index : header["held_out"]) {
            const auto i = index.get<std::size_t>();
            if (i >= rows) throw parse_error(paths.sidecar.string() + ": held_out index out of range");
            data.held_out[i] = 1;
        }
    }
    data.profile = frequency_profile(data.labels, classes);
    if (header.contains("counts")) {
        const auto stored = header["counts"].get<std::vector<std::int64_t>>();
        const auto recount = data.profile.counts();
        if (!std::equal(stored.begin(), stored.end(), recount.begin(), recount.end())) {
            throw parse_error(paths.sidecar.string() + ": stored counts disagree with labels");
        }
    }
    return data;
}

json to_json(const TemperatureFile& temps) {
    json j = {
        {"schema_version", kSchemaVersion},
        {"t_opt", temps.t_opt},
        {"gamma", temps.gamma},
        {"temps", temps.temps},
    };
    j["source_profile"] = temps.source_profile ? json(*temps.source_profile) : json(nullptr);
    if (temps.fitted_on) j["fitted_on"] = *temps.fitted_on;
    return j;
}

TemperatureFile temperature_file_from_json(const json& j) {
    TemperatureFile out;
    try {
        out.t_opt = j.at("t_opt").get<double>();
        out.gamma = j.value("gamma", 0.0);
        out.temps = j.at("temps").get<std::vector<double>>();
        if (j.contains("source_profile") && !j["source_profile"].is_null()) {
            out.source_profile = j["source_profile"].get<std::vector<std::int64_t>>();
        }
        if (j.contains("fitted_on")) out.fitted_on = j["fitted_on"].get<std::string>();
    } catch (const json::exception& e) {
        throw parse_error(std::string("temperature file: ") + e.what());
    }
    return out;
}

void save_temperatures(const fs::path& path, const TemperatureFile& temps) {
    write_json(path, to_json(temps));
}

TemperatureFile load_temperatures(const fs::path& path) {
    return temperature_file_from_json(read_json(path));
}

ClassFrequencyProfile load_profile(const fs::path& path) {
    const auto j = read_json(path);
    for (const char* key : {"train_counts", "counts", "source_profile"}) {
        if (j.contains(key) && j[key].is_array()) {
            return ClassFrequencyProfile(j[key].get<std::vector<std::int64_t>>());
        }
    }
    throw parse_error(path.string() + ": no 'train_counts', 'counts' or 'source_profile' array");
}

json smoothing_json(double alpha, double gamma, const SmoothingVector& smoothing,
                    const std::vector<double>& row_sums) {
    json j = {
        {"schema_version", kSchemaVersion},
        {"alpha", alpha},
        {"gamma", gamma},
        {"alphas", std::vector<double>(smoothing.values().begin(), smoothing.values().end())},
    };
    if (!row_sums.empty()) {
        const auto [lo, hi] = std::minmax_element(row_sums.begin(), row_sums.end());
        j["row_sum_min"] = *lo;
        j["row_sum_max"] = *hi;
    }
    return j;
}

json to_json(const TrainConfig& cfg) {
    const char* loss = cfg.loss.kind == LossKind::CE   ? "ce"
                       : cfg.loss.kind == LossKind::LS ? "ls"
                                                       : "cda-ls";
    return {
        {"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size},
        {"learning_rate", cfg.learning_rate},
        {"momentum", cfg.momentum},
        {"seed", cfg.seed},
        {"loss", loss},
        {"alpha", cfg.loss.alpha},
        {"gamma", cfg.loss.gamma},
        {"l2", cfg.l2},
        {"hidden_width", cfg.hidden_width},
        {"init_scale", cfg.init_scale},
        {"renormalize_targets", cfg.renormalize_targets},
    };
}

TrainConfig train_config_from_json(const json& j, TrainConfig base) {
    try {
        base.epochs = j.value("epochs", base.epochs);
        base.batch_size = j.value("batch_size", base.batch_size);
        base.learning_rate = j.value("learning_rate", base.learning_rate);
        base.momentum = j.value("momentum", base.momentum);
        base.seed = j.value("seed", base.seed);
        base.l2 = j.value("l2", base.l2);
        base.hidden_width = j.value("hidden_width", base.hidden_width);
        base.init_scale = j.value("init_scale", base.init_scale);
        base.renormalize_targets = j.value("renormalize_targets", base.renormalize_targets);
        base.loss.alpha = j.value("alpha", base.loss.alpha);
        base.loss.gamma = j.value("gamma", base.loss.gamma);
        if (j.contains("loss")) {
            const auto loss = j["loss"].get<std::string>();
            if (loss == "ce") base.loss.kind = LossKind::CE;
            else if (loss == "ls") base.loss.kind = LossKind::LS;
            else if (loss == "cda-ls") base.loss.kind = LossKind::CdaLs;
            else throw parse_error("unknown loss '" + loss + "'");
        }
    } catch (const json::exception& e) {
        throw parse_error(std::string("train config: ") + e.what());
    }
    return base;
}

void save_model(const fs::path& path, const LinearModel& model, const TrainConfig& cfg) {
    const auto paths = binary_paths(path);
    json header = {
        {"schema_version", kSchemaVersion},
        {"kind", "model"},
        {"input_dim", model.input_dim()},
        {"num_classes", model.num_classes()},
        {"hidden_width", model.hidden_width()},
        {"parameter_count", model.parameter_count()},
        {"dtype", "f64"},
        {"seed", cfg.seed},
        {"config", to_json(cfg)},
        {"payload", paths.payload.filename().string()},
    };
    write_file(paths.payload, encode_payload(model.params(), DType::F64));
    write_json(paths.sidecar, header);
}

LinearModel load_model(const fs::path& path) {
    const auto paths = binary_paths(path);
    const auto header = read_json(paths.sidecar);
    LinearModel model(require_size(header, "input_dim", paths.sidecar),
                      require_size(header, "num_classes", paths.sidecar),
                      header.value("hidden_width", std::size_t{0}));
    const auto values = decode_payload(read_file(paths.payload), model.parameter_count(), 1,
                                       DType::F64, paths.payload);
    std::copy(values.begin(), values.end(), model.params().begin());
    return model;
}

json to_json(const MetricsConfig& cfg) {
    return {{"num_bins", cfg.num_bins},
            {"tace_threshold", cfg.tace_threshold},
            {"tace_ranges", cfg.tace_ranges}};
}

json report_json(const MetricReport& report) {
    return {
        {"schema_version", kSchemaVersion},
        {"acc", report.acc},
        {"ece", report.ece},
        {"sce", report.sce},
        {"tace", report.tace},
        {"brier", report.brier},
        {"uce", report.uce},
        {"nll", report.nll},
        {"config", to_json(report.config)},
    };
}

void write_reliability_csv(const fs::path& path, const std::vector<ReliabilityRow>& rows) {
    std::string out = "bin_lo,bin_hi,n,acc,conf,gap\n";
    for (const auto& r : rows) {
        out += format_double(r.bin_lo) + ',' + format_double(r.bin_hi) + ',' +
               std::to_string(r.n) + ',' + format_double(r.acc) + ',' + format_double(r.conf) +
               ',' + format_double(r.gap) + '\n';
    }
    write_file(path, out);
}

void write_by_class_csv(const fs::path& path, const std::vector<ClassConfidenceRow>& rows) {
    std::string out = "class,count,freq_normalized,mean_confidence\n";
    for (const auto& r : rows) {
        out += std::to_string(r.class_index) + ',' + std::to_string(r.count) + ',' +
               format_double(r.freq_normalized) + ',' +
               (r.mean_confidence ? format_double(*r.mean_confidence) : std::string()) + '\n';
    }
    write_file(path, out);
}

void write_trace_csv(const fs::path& path, const std::vector<EpochStats>& trace) {
    std::string out = "epoch,train_loss,val_acc,val_ece\n";
    for (const auto& e : trace) {
        out += std::to_string(e.epoch) + ',' + format_double(e.train_loss) + ',' +
               (e.val_acc ? format_double(*e.val_acc) : std::string()) + ',' +
               (e.val_ece ? format_double(*e.val_ece) : std::string()) + '\n';
    }
    write_file(path, out);
}

}  // namespace cdacal::io
