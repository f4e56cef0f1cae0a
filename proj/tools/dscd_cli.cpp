// Batch front-end: run a configured experiment, compare result sets, or print defaults.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dscd/dscd.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::optional<std::string> env_out_dir() {
  if (const char* v = std::getenv("DSCD_OUT_DIR"); v != nullptr && *v != '\0') return std::string(v);
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nested actor-critic RAN scheduler placement simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string mode, format = "csv", out_dir;
  std::uint64_t seed = 0;
  std::size_t runs = 0;
  std::int64_t ttis = 0;
  bool override_envelope = false;
  std::vector<std::string> sets;

  auto* run_cmd = app.add_subcommand("run", "Run the simulation batch and write metric files");
  run_cmd->add_option("--config", config_path, "Config file (key = value lines)");
  auto* mode_opt = run_cmd->add_option("--mode", mode, "dscd | nf-du | nf-cu");
  auto* seed_opt = run_cmd->add_option("--seed", seed, "Base seed; run i uses seed + i");
  auto* runs_opt = run_cmd->add_option("--runs", runs, "Number of independent runs");
  auto* ttis_opt = run_cmd->add_option("--ttis", ttis, "TTIs per run");
  auto* out_opt = run_cmd->add_option("--out", out_dir, "Output directory (default: $DSCD_OUT_DIR or dscd-out)");
  run_cmd->add_option("--format", format, "csv | json");
  run_cmd->add_flag("--override", override_envelope, "Allow URLLC/vehicle densities outside 10-30%");
  run_cmd->add_option("--set", sets, "Extra key=value overrides");

  std::vector<std::string> compare_paths;
  std::string compare_out;
  auto* cmp_cmd = app.add_subcommand("compare", "Compare aggregate files; the first is the reference");
  cmp_cmd->add_option("files", compare_paths, "Aggregate metric files")->required()->expected(2, -1);
  cmp_cmd->add_option("--out", compare_out, "Write the comparison CSV here instead of stdout");

  auto* defaults_cmd = app.add_subcommand("defaults", "Print the fully resolved default configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*defaults_cmd) {
      std::cout << dscd::emit_config(dscd::SimConfig{});
      return kExitOk;
    }

    if (*cmp_cmd) {
      std::vector<dscd::LoadedMetrics> files;
      for (const auto& p : compare_paths) files.push_back(dscd::load_metrics(p));
      const auto result = dscd::compare(files, compare_paths);
      const std::string csv = dscd::comparison_to_csv(result, compare_paths.front());
      if (result.config_mismatch) std::cerr << "warning: config fingerprints differ between compared runs\n";
      if (result.seed_mismatch) std::cerr << "warning: compared runs use different seeds\n";
      if (compare_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream out(compare_out);
        if (!out) throw dscd::IoError("cannot write '" + compare_out + "'");
        out << csv;
      }
      return kExitOk;
    }

    dscd::ConfigOverrides flags;
    if (*mode_opt) flags.mode = mode;
    if (*seed_opt) flags.seed = seed;
    if (*runs_opt) flags.runs = runs;
    if (*ttis_opt) flags.ttis = ttis;
    flags.override_envelope = override_envelope;
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw dscd::ConfigError("--set expects key=value, got '" + kv + "'");
      flags.values.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    const auto cfg = dscd::resolve_config(config_path.empty() ? std::nullopt : std::optional(config_path), flags);
    const auto fmt = dscd::format_from_name(format);
    std::filesystem::path out = "dscd-out";
    if (*out_opt)
      out = out_dir;
    else if (auto env = env_out_dir())
      out = *env;

    const auto start = std::chrono::steady_clock::now();
    const auto batch = dscd::run(cfg);
    dscd::RunManifest manifest{cfg};
    manifest.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto written = dscd::emit_metrics(batch, manifest, fmt, out);
    for (const auto& s : batch.summary) {
      std::cout << dscd::class_name(s.traffic) << ": pdr=" << (s.pdr ? std::to_string(*s.pdr) : "-")
                << " mean_hol_ms=" << (s.mean_hol_ms ? std::to_string(*s.mean_hol_ms) : "-")
                << " throughput_kbps=" << (s.throughput_kbps ? std::to_string(*s.throughput_kbps) : "-")
                << " du_ratio=" << (s.du_ratio ? std::to_string(*s.du_ratio) : "-") << "\n";
    }
    std::cout << "wrote " << written.size() << " files to " << out.string() << "\n";
    return kExitOk;
  } catch (const dscd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const dscd::NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}
