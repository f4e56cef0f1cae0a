#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "errors.hpp"
#include "sim.hpp"

namespace dscd {

inline constexpr const char* kArtifactVersion = "dscd-sim/1.0.0";
inline constexpr const char* kCsvHeader = "window_start_tti,class,mode,mean_hol_ms,pdr,throughput_kbps,du_ratio,cu_ratio";

enum class OutputFormat { csv, json };

inline OutputFormat format_from_name(std::string_view s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw ConfigError("--format: expected csv or json, got '" + std::string(s) + "'");
}

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline nlohmann::json json_cell(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace detail

inline std::string rows_to_csv(const std::vector<AggregateRow>& rows, Mode mode) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.window_start_tti) + "," + std::string(class_name(r.traffic)) + "," +
           std::string(mode_name(mode)) + "," + detail::cell(r.mean_hol_ms) + "," + detail::cell(r.pdr) + "," +
           detail::cell(r.throughput_kbps) + "," + detail::cell(r.du_ratio) + "," + detail::cell(r.cu_ratio) + "\n";
  }
  return out;
}

inline nlohmann::json rows_to_json(const std::vector<AggregateRow>& rows, Mode mode) {
  auto arr = nlohmann::json::array();
  for (const auto& r : rows)
    arr.push_back({{"window_start_tti", r.window_start_tti},
                   {"class", class_name(r.traffic)},
                   {"mode", mode_name(mode)},
                   {"mean_hol_ms", detail::json_cell(r.mean_hol_ms)},
                   {"pdr", detail::json_cell(r.pdr)},
                   {"throughput_kbps", detail::json_cell(r.throughput_kbps)},
                   {"du_ratio", detail::json_cell(r.du_ratio)},
                   {"cu_ratio", detail::json_cell(r.cu_ratio)}});
  return {{"rows", arr}};
}

inline std::vector<AggregateRow> summary_rows(const std::vector<ClassSummary>& summary) {
  std::vector<AggregateRow> rows;
  for (const auto& s : summary) {
    if (!s.mean_hol_ms && !s.pdr && !s.throughput_kbps && !s.du_ratio && !s.cu_ratio) continue;
    rows.push_back({-1, s.traffic, s.mean_hol_ms, s.pdr, s.throughput_kbps, s.du_ratio, s.cu_ratio});
  }
  return rows;
}

struct RunManifest {
  SimConfig config;
  std::string version = kArtifactVersion;
  double wall_clock_s = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& key : config_keys()) cfg[key] = get_config_value(config, key);
    std::ostringstream fp;
    fp << std::hex << config_fingerprint(config);
    return {{"version", version},
            {"mode", mode_name(config.mode)},
            {"seed", config.seed},
            {"n_runs", config.n_runs},
            {"config_fingerprint", fp.str()},
            {"wall_clock_s", wall_clock_s},
            {"config", cfg}};
  }

  static RunManifest from_json(const nlohmann::json& j) {
    RunManifest m;
    m.version = j.value("version", std::string(kArtifactVersion));
    m.wall_clock_s = j.value("wall_clock_s", 0.0);
    for (const auto& [key, value] : j.at("config").items()) set_config_value(m.config, key, value.get<std::string>());
    m.config.validate();
    return m;
  }
};

inline std::string file_extension(OutputFormat f) { return f == OutputFormat::csv ? ".csv" : ".json"; }

// Writes manifest.json, then run_<i>.<ext> per run, aggregate.<ext> and summary.<ext>.
inline std::vector<std::filesystem::path> emit_metrics(const BatchResult& batch, const RunManifest& manifest,
                                                       OutputFormat format, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw IoError("cannot create output directory '" + out_dir.string() + "'");

  std::vector<std::filesystem::path> written;
  const auto manifest_path = out_dir / "manifest.json";
  detail::write_file(manifest_path, manifest.to_json().dump(2) + "\n");
  written.push_back(manifest_path);

  const Mode mode = manifest.config.mode;
  const auto classes = active_classes(manifest.config);
  auto emit = [&](const std::string& stem, const std::vector<AggregateRow>& rows) {
    const auto path = out_dir / (stem + file_extension(format));
    detail::write_file(path, format == OutputFormat::csv ? rows_to_csv(rows, mode) : rows_to_json(rows, mode).dump(2) + "\n");
    written.push_back(path);
  };
  for (std::size_t i = 0; i < batch.runs.size(); ++i)
    emit("run_" + std::to_string(i), per_window_rows(batch.runs[i], classes));
  emit("aggregate", batch.aggregate);
  emit("summary", summary_rows(batch.summary));
  return written;
}

// ---- loading and comparison ----------------------------------------------------

inline std::optional<double> parse_optional(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw IoError("bad number '" + s + "' in metrics file");
  return v;
}

struct LoadedMetrics {
  std::string mode;
  std::vector<AggregateRow> rows;
  std::optional<RunManifest> manifest;
};

inline LoadedMetrics load_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  LoadedMetrics m;
  if (path.extension() == ".json") {
    nlohmann::json j;
    in >> j;
    for (const auto& r : j.at("rows")) {
      AggregateRow row;
      row.window_start_tti = r.at("window_start_tti").get<std::int64_t>();
      row.traffic = class_from_name(r.at("class").get<std::string>());
      m.mode = r.at("mode").get<std::string>();
      auto opt = [&](const char* k) -> std::optional<double> {
        return r.at(k).is_null() ? std::nullopt : std::optional<double>(r.at(k).get<double>());
      };
      row.mean_hol_ms = opt("mean_hol_ms"), row.pdr = opt("pdr"), row.throughput_kbps = opt("throughput_kbps");
      row.du_ratio = opt("du_ratio"), row.cu_ratio = opt("cu_ratio");
      m.rows.push_back(row);
    }
  } else {
    std::string line;
    std::getline(in, line);
    if (line != kCsvHeader) throw IoError("'" + path.string() + "' does not start with the metrics header");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> f;
      std::stringstream ss(line);
      std::string item;
      while (std::getline(ss, item, ',')) f.push_back(item);
      while (f.size() < 8) f.emplace_back();
      AggregateRow row;
      row.window_start_tti = std::stoll(f[0]);
      row.traffic = class_from_name(f[1]);
      m.mode = f[2];
      row.mean_hol_ms = parse_optional(f[3]), row.pdr = parse_optional(f[4]);
      row.throughput_kbps = parse_optional(f[5]), row.du_ratio = parse_optional(f[6]), row.cu_ratio = parse_optional(f[7]);
      m.rows.push_back(row);
    }
  }
  const auto manifest_path = path.parent_path() / "manifest.json";
  if (std::filesystem::exists(manifest_path)) {
    std::ifstream mi(manifest_path);
    nlohmann::json j;
    mi >> j;
    m.manifest = RunManifest::from_json(j);
  }
  return m;
}

struct ComparisonRow {
  std::string label;  // file being compared against the reference
  TrafficClass traffic = TrafficClass::video;
  std::string metric;
  std::optional<double> reference, value, delta, ratio;
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  bool config_mismatch = false;
  bool seed_mismatch = false;
};

// Mean of a metric over the trailing fraction of a file's windows.
inline std::optional<double> tail_mean(const std::vector<AggregateRow>& rows, TrafficClass c,
                                       std::optional<double> AggregateRow::*metric, double fraction) {
  std::vector<const AggregateRow*> mine;
  for (const auto& r : rows)
    if (r.traffic == c) mine.push_back(&r);
  if (mine.empty()) return std::nullopt;
  auto keep = static_cast<std::size_t>(static_cast<double>(mine.size()) * fraction + 0.5);
  keep = std::clamp<std::size_t>(keep, 1, mine.size());
  std::vector<std::optional<double>> xs;
  for (std::size_t i = mine.size() - keep; i < mine.size(); ++i) xs.push_back(mine[i]->*metric);
  return mean_of(xs);
}

// Compares every file against the first: per class and metric, the tail means,
// their difference and ratio.
inline Comparison compare(const std::vector<LoadedMetrics>& files, const std::vector<std::string>& labels) {
  if (files.size() < 2) throw ConfigError("compare needs at least two metrics files");
  Comparison out;
  const auto& ref = files.front();
  const double fraction = ref.manifest ? ref.manifest->config.tail_fraction : 0.5;
  for (std::size_t k = 1; k < files.size(); ++k) {
    const auto& other = files[k];
    if (ref.manifest && other.manifest) {
      if (config_fingerprint(ref.manifest->config, true, true) != config_fingerprint(other.manifest->config, true, true))
        out.config_mismatch = true;
      if (ref.manifest->config.seed != other.manifest->config.seed) out.seed_mismatch = true;
    }
    const std::pair<const char*, std::optional<double> AggregateRow::*> metrics[] = {
        {"mean_hol_ms", &AggregateRow::mean_hol_ms}, {"pdr", &AggregateRow::pdr},
        {"throughput_kbps", &AggregateRow::throughput_kbps}, {"du_ratio", &AggregateRow::du_ratio},
        {"cu_ratio", &AggregateRow::cu_ratio}};
    for (auto c : kAllClasses) {
      for (const auto& [name, member] : metrics) {
        ComparisonRow row;
        row.label = labels.at(k);
        row.traffic = c;
        row.metric = name;
        row.reference = tail_mean(ref.rows, c, member, fraction);
        row.value = tail_mean(other.rows, c, member, fraction);
        if (!row.reference && !row.value) continue;
        if (row.reference && row.value) {
          row.delta = *row.value - *row.reference;
          if (*row.reference != 0.0) row.ratio = *row.value / *row.reference;
        }
        out.rows.push_back(row);
      }
    }
  }
  return out;
}

inline std::string comparison_to_csv(const Comparison& c, const std::string& reference_label) {
  std::string out = "reference,compared,class,metric,reference_value,value,delta,ratio,config_mismatch,seed_mismatch\n";
  for (const auto& r : c.rows)
    out += reference_label + "," + r.label + "," + std::string(class_name(r.traffic)) + "," + r.metric + "," +
           detail::cell(r.reference) + "," + detail::cell(r.value) + "," + detail::cell(r.delta) + "," +
           detail::cell(r.ratio) + "," + (c.config_mismatch ? "1" : "0") + "," + (c.seed_mismatch ? "1" : "0") + "\n";
  return out;
}

}  // namespace dscd
