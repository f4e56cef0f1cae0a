#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <utility>
#include <vector>

#include "a2c.hpp"
#include "errors.hpp"
#include "placement.hpp"
#include "ran.hpp"
#include "scheduler.hpp"

namespace dscd {

enum class Mode { dscd, nf_du, nf_cu };
enum class Scenario { fixed, mobile };

inline std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::dscd: return "dscd";
    case Mode::nf_du: return "nf-du";
    case Mode::nf_cu: return "nf-cu";
  }
  return "dscd";
}

inline Mode mode_from_name(std::string_view s) {
  if (s == "dscd") return Mode::dscd;
  if (s == "nf-du") return Mode::nf_du;
  if (s == "nf-cu") return Mode::nf_cu;
  throw ConfigError("sim.mode: expected dscd, nf-du or nf-cu, got '" + std::string(s) + "'");
}

inline std::string_view scenario_name(Scenario s) { return s == Scenario::fixed ? "fixed" : "mobile"; }

inline Scenario scenario_from_name(std::string_view s) {
  if (s == "fixed") return Scenario::fixed;
  if (s == "mobile") return Scenario::mobile;
  throw ConfigError("sim.scenario: expected fixed or mobile, got '" + std::string(s) + "'");
}

struct TrafficConfig {
  double packet_size_bits = 1000.0;
  double video_rate_kbps = 256.0;
  double ar_rate_kbps = 256.0;
  double v2x_rate_kbps = 256.0;
  double max_rate_per_ue_kbps = 256.0;
  // Cap on expected packet arrivals per TTI across the network.
  double streams_per_tti = 50.0;

  double rate_kbps(TrafficClass c) const {
    switch (c) {
      case TrafficClass::video: return video_rate_kbps;
      case TrafficClass::ar: return ar_rate_kbps;
      case TrafficClass::v2x: return v2x_rate_kbps;
    }
    return 0.0;
  }
};

struct SimConfig {
  Mode mode = Mode::dscd;
  Scenario scenario = Scenario::fixed;
  std::size_t n_cells = 4;
  std::size_t n_ues = 40;
  std::size_t n_rbg = 8;
  double tti_ms = 1.0;
  std::int64_t total_ttis = 5000;
  std::size_t n_runs = 10;
  std::uint64_t seed = 1;
  double urllc_density = 0.2;
  double vehicle_ratio = 0.3;
  double vehicle_speed_mps = 20.0;
  double cell_spacing_m = 500.0;
  std::int64_t window_ttis = 100;
  double tail_fraction = 0.5;
  bool audit = true;
  std::size_t threads = 0;  // 0: one per hardware thread
  bool override_envelope = false;

  TrafficConfig traffic;
  ChannelConfig channel;
  SchedulerConfig scheduler;
  PlacementConfig placement;

  // Hyperparameters shared by both agents; shapes are set per agent.
  double gamma = 0.9;
  double lr_actor = 0.01;
  double lr_critic = 0.05;
  std::size_t actor_hidden = 900;
  std::size_t critic_hidden = 100;
  bool clip_gradients = true;
  double clip_norm = 10.0;

  A2cConfig agent_config(std::size_t obs_dim, std::size_t n_actions, std::uint64_t agent_seed) const {
    A2cConfig c;
    c.obs_dim = obs_dim;
    c.n_actions = n_actions;
    c.actor_hidden = actor_hidden;
    c.critic_hidden = critic_hidden;
    c.gamma = gamma;
    c.lr_actor = lr_actor;
    c.lr_critic = lr_critic;
    c.clip_gradients = clip_gradients;
    c.clip_norm = clip_norm;
    c.seed = agent_seed;
    return c;
  }

  void validate() const;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ConfigError(std::string(key) + ": cannot parse '" + std::string(text) + "'");
  return value;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(text) + "'");
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct Field {
  std::function<std::string(const SimConfig&)> get;
  std::function<void(SimConfig&, std::string_view)> set;
};

template <typename T>
Field number_field(const char* key, T SimConfig::*member) {
  return {[member](const SimConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return format_double(c.*member);
            else
              return std::to_string(c.*member);
          },
          [member, key](SimConfig& c, std::string_view v) { c.*member = parse_number<T>(key, v); }};
}

template <typename Sub, typename T>
Field nested_number(const char* key, Sub SimConfig::*sub, T Sub::*member) {
  return {[sub, member](const SimConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return format_double(c.*sub.*member);
            else
              return std::to_string(c.*sub.*member);
          },
          [sub, member, key](SimConfig& c, std::string_view v) { c.*sub.*member = parse_number<T>(key, v); }};
}

inline Field bool_field(const char* key, bool SimConfig::*member) {
  return {[member](const SimConfig& c) { return std::string(c.*member ? "true" : "false"); },
          [member, key](SimConfig& c, std::string_view v) { c.*member = parse_bool(key, v); }};
}

template <typename Sub>
Field nested_bool(const char* key, Sub SimConfig::*sub, bool Sub::*member) {
  return {[sub, member](const SimConfig& c) { return std::string(c.*sub.*member ? "true" : "false"); },
          [sub, member, key](SimConfig& c, std::string_view v) { c.*sub.*member = parse_bool(key, v); }};
}

inline const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;
    f["sim.mode"] = {[](const SimConfig& c) { return std::string(mode_name(c.mode)); },
                     [](SimConfig& c, std::string_view v) { c.mode = mode_from_name(v); }};
    f["sim.scenario"] = {[](const SimConfig& c) { return std::string(scenario_name(c.scenario)); },
                         [](SimConfig& c, std::string_view v) { c.scenario = scenario_from_name(v); }};
    f["sim.n_cells"] = number_field("sim.n_cells", &SimConfig::n_cells);
    f["sim.n_ues"] = number_field("sim.n_ues", &SimConfig::n_ues);
    f["sim.n_rbg"] = number_field("sim.n_rbg", &SimConfig::n_rbg);
    f["sim.tti_ms"] = number_field("sim.tti_ms", &SimConfig::tti_ms);
    f["sim.total_ttis"] = number_field("sim.total_ttis", &SimConfig::total_ttis);
    f["sim.n_runs"] = number_field("sim.n_runs", &SimConfig::n_runs);
    f["sim.seed"] = number_field("sim.seed", &SimConfig::seed);
    f["sim.urllc_density"] = number_field("sim.urllc_density", &SimConfig::urllc_density);
    f["sim.vehicle_ratio"] = number_field("sim.vehicle_ratio", &SimConfig::vehicle_ratio);
    f["sim.vehicle_speed_mps"] = number_field("sim.vehicle_speed_mps", &SimConfig::vehicle_speed_mps);
    f["sim.cell_spacing_m"] = number_field("sim.cell_spacing_m", &SimConfig::cell_spacing_m);
    f["sim.window_ttis"] = number_field("sim.window_ttis", &SimConfig::window_ttis);
    f["sim.tail_fraction"] = number_field("sim.tail_fraction", &SimConfig::tail_fraction);
    f["sim.audit"] = bool_field("sim.audit", &SimConfig::audit);
    f["sim.threads"] = number_field("sim.threads", &SimConfig::threads);
    f["sim.override_envelope"] = bool_field("sim.override_envelope", &SimConfig::override_envelope);

    f["traffic.packet_size_bits"] = nested_number("traffic.packet_size_bits", &SimConfig::traffic, &TrafficConfig::packet_size_bits);
    f["traffic.video_rate_kbps"] = nested_number("traffic.video_rate_kbps", &SimConfig::traffic, &TrafficConfig::video_rate_kbps);
    f["traffic.ar_rate_kbps"] = nested_number("traffic.ar_rate_kbps", &SimConfig::traffic, &TrafficConfig::ar_rate_kbps);
    f["traffic.v2x_rate_kbps"] = nested_number("traffic.v2x_rate_kbps", &SimConfig::traffic, &TrafficConfig::v2x_rate_kbps);
    f["traffic.max_rate_per_ue_kbps"] = nested_number("traffic.max_rate_per_ue_kbps", &SimConfig::traffic, &TrafficConfig::max_rate_per_ue_kbps);
    f["traffic.streams_per_tti"] = nested_number("traffic.streams_per_tti", &SimConfig::traffic, &TrafficConfig::streams_per_tti);

    f["channel.path_loss_exponent"] = nested_number("channel.path_loss_exponent", &SimConfig::channel, &ChannelConfig::path_loss_exponent);
    f["channel.reference_distance_m"] = nested_number("channel.reference_distance_m", &SimConfig::channel, &ChannelConfig::reference_distance_m);
    f["channel.max_radius_m"] = nested_number("channel.max_radius_m", &SimConfig::channel, &ChannelConfig::max_radius_m);
    f["channel.shadowing"] = nested_bool("channel.shadowing", &SimConfig::channel, &ChannelConfig::shadowing);
    f["channel.shadowing_sigma_db"] = nested_number("channel.shadowing_sigma_db", &SimConfig::channel, &ChannelConfig::shadowing_sigma_db);
    f["channel.interference_penalty"] = nested_number("channel.interference_penalty", &SimConfig::channel, &ChannelConfig::interference_penalty);
    f["channel.rbs_per_rbg"] = nested_number("channel.rbs_per_rbg", &SimConfig::channel, &ChannelConfig::rbs_per_rbg);

    f["a2c.gamma"] = number_field("a2c.gamma", &SimConfig::gamma);
    f["a2c.lr_actor"] = number_field("a2c.lr_actor", &SimConfig::lr_actor);
    f["a2c.lr_critic"] = number_field("a2c.lr_critic", &SimConfig::lr_critic);
    f["a2c.actor_hidden"] = number_field("a2c.actor_hidden", &SimConfig::actor_hidden);
    f["a2c.critic_hidden"] = number_field("a2c.critic_hidden", &SimConfig::critic_hidden);
    f["a2c.clip_gradients"] = bool_field("a2c.clip_gradients", &SimConfig::clip_gradients);
    f["a2c.clip_norm"] = number_field("a2c.clip_norm", &SimConfig::clip_norm);

    f["scheduler.slots"] = nested_number("scheduler.slots", &SimConfig::scheduler, &SchedulerConfig::slots);
    f["scheduler.training"] = nested_bool("scheduler.training", &SimConfig::scheduler, &SchedulerConfig::training);
    f["scheduler.masking"] = nested_bool("scheduler.masking", &SimConfig::scheduler, &SchedulerConfig::masking);
    f["scheduler.buffer_cap_bits"] = nested_number("scheduler.buffer_cap_bits", &SimConfig::scheduler, &SchedulerConfig::buffer_cap_bits);

    f["placement.cu_extra_delay_ttis"] = nested_number("placement.cu_extra_delay_ttis", &SimConfig::placement, &PlacementConfig::cu_extra_delay_ttis);
    f["placement.coordination"] = nested_bool("placement.coordination", &SimConfig::placement, &PlacementConfig::coordination);
    f["placement.epoch_length"] = nested_number("placement.epoch_length", &SimConfig::placement, &PlacementConfig::epoch_length);
    f["placement.tau"] = nested_number("placement.tau", &SimConfig::placement, &PlacementConfig::tau);
    f["placement.lambda"] = nested_number("placement.lambda", &SimConfig::placement, &PlacementConfig::lambda);
    f["placement.training"] = nested_bool("placement.training", &SimConfig::placement, &PlacementConfig::training);
    f["placement.episodic"] = nested_bool("placement.episodic", &SimConfig::placement, &PlacementConfig::episodic);
    f["placement.buffer_cap_bits"] = nested_number("placement.buffer_cap_bits", &SimConfig::placement, &PlacementConfig::buffer_cap_bits);
    return f;
  }();
  return table;
}

}  // namespace detail

inline void SimConfig::validate() const {
  if (n_cells == 0) throw ConfigError("sim.n_cells must be positive");
  if (n_ues == 0) throw ConfigError("sim.n_ues must be positive");
  if (n_rbg == 0) throw ConfigError("sim.n_rbg must be positive");
  if (!(tti_ms > 0.0)) throw ConfigError("sim.tti_ms must be positive");
  if (total_ttis < 0) throw ConfigError("sim.total_ttis must be non-negative");
  if (n_runs == 0) throw ConfigError("sim.n_runs must be positive");
  if (window_ttis < 1) throw ConfigError("sim.window_ttis must be at least 1");
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) throw ConfigError("sim.tail_fraction must lie in (0, 1]");
  if (!(cell_spacing_m > 0.0)) throw ConfigError("sim.cell_spacing_m must be positive");
  if (vehicle_speed_mps < 0.0) throw ConfigError("sim.vehicle_speed_mps must be non-negative");
  if (!(urllc_density >= 0.0 && urllc_density <= 1.0)) throw ConfigError("sim.urllc_density must lie in [0, 1]");
  if (!(vehicle_ratio >= 0.0 && vehicle_ratio <= 1.0)) throw ConfigError("sim.vehicle_ratio must lie in [0, 1]");
  if (!override_envelope) {
    if (urllc_density < 0.1 || urllc_density > 0.3)
      throw ConfigError("sim.urllc_density must lie in [0.1, 0.3] (set --override to go beyond)");
    if (scenario == Scenario::mobile && (vehicle_ratio < 0.1 || vehicle_ratio > 0.3))
      throw ConfigError("sim.vehicle_ratio must lie in [0.1, 0.3] (set --override to go beyond)");
  }
  const double urllc = urllc_density + (scenario == Scenario::mobile ? vehicle_ratio : 0.0);
  if (urllc > 1.0 + 1e-12) throw ConfigError("sim.urllc_density plus sim.vehicle_ratio exceed 1");

  if (!(traffic.packet_size_bits >= 1.0)) throw ConfigError("traffic.packet_size_bits must be at least 1");
  if (!(traffic.max_rate_per_ue_kbps > 0.0)) throw ConfigError("traffic.max_rate_per_ue_kbps must be positive");
  const std::pair<const char*, double> rates[] = {{"traffic.video_rate_kbps", traffic.video_rate_kbps},
                                                  {"traffic.ar_rate_kbps", traffic.ar_rate_kbps},
                                                  {"traffic.v2x_rate_kbps", traffic.v2x_rate_kbps}};
  for (const auto& [key, rate] : rates)
    if (rate < 0.0 || rate > traffic.max_rate_per_ue_kbps)
      throw ConfigError(std::string(key) + " must lie in [0, traffic.max_rate_per_ue_kbps]");
  if (!(traffic.streams_per_tti > 0.0)) throw ConfigError("traffic.streams_per_tti must be positive");

  channel.validate();
  scheduler.validate();
  placement.validate();
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("a2c.gamma must lie in [0, 1]");
  if (!(lr_actor > 0.0 && lr_actor <= 1.0)) throw ConfigError("a2c.lr_actor must lie in (0, 1]");
  if (!(lr_critic > 0.0 && lr_critic <= 1.0)) throw ConfigError("a2c.lr_critic must lie in (0, 1]");
  if (actor_hidden == 0) throw ConfigError("a2c.actor_hidden must be positive");
  if (critic_hidden == 0) throw ConfigError("a2c.critic_hidden must be positive");
  if (clip_gradients && !(clip_norm > 0.0)) throw ConfigError("a2c.clip_norm must be positive");
}

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : detail::fields()) keys.push_back(k);
  return keys;
}

// Sets one key from its textual value. Unknown keys are rejected by name.
inline void set_config_value(SimConfig& cfg, const std::string& key, std::string_view value) {
  const auto& f = detail::fields();
  const auto it = f.find(key);
  if (it == f.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(cfg, detail::trim(value));
}

inline std::string get_config_value(const SimConfig& cfg, const std::string& key) {
  const auto& f = detail::fields();
  const auto it = f.find(key);
  if (it == f.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second.get(cfg);
}

// Applies "key = value" lines onto cfg. '#' starts a comment. Does not validate.
inline void apply_config_text(SimConfig& cfg, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    set_config_value(cfg, detail::trim(std::string_view(body).substr(0, eq)),
                     std::string_view(body).substr(eq + 1));
  }
}

inline SimConfig parse_config_text(std::string_view text) {
  SimConfig cfg;
  apply_config_text(cfg, text);
  cfg.validate();
  return cfg;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline SimConfig parse_config_file(const std::string& path) { return parse_config_text(read_text_file(path)); }

// Command-line values layered over the config file.
struct ConfigOverrides {
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::optional<std::int64_t> ttis;
  bool override_envelope = false;
  std::vector<std::pair<std::string, std::string>> values;  // generic key=value overrides
};

// Defaults, then the file (if any), then flags; validated once at the end.
inline SimConfig resolve_config(const std::optional<std::string>& path, const ConfigOverrides& flags) {
  SimConfig cfg;
  if (path) apply_config_text(cfg, read_text_file(*path));
  for (const auto& [k, v] : flags.values) set_config_value(cfg, k, v);
  if (flags.mode) cfg.mode = mode_from_name(*flags.mode);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.runs) cfg.n_runs = *flags.runs;
  if (flags.ttis) cfg.total_ttis = *flags.ttis;
  if (flags.override_envelope) cfg.override_envelope = true;
  cfg.validate();
  return cfg;
}

// Every key with its resolved value, one "key = value" line each, sorted by key.
inline std::string emit_config(const SimConfig& cfg) {
  std::string out;
  for (const auto& [key, field] : detail::fields()) out += key + " = " + field.get(cfg) + "\n";
  return out;
}

// Stable hash of the resolved config; sim.mode and sim.seed can be excluded so
// runs that differ only in those compare as the same experiment.
inline std::uint64_t config_fingerprint(const SimConfig& cfg, bool ignore_mode = true, bool ignore_seed = false) {
  std::string text;
  for (const auto& [key, field] : detail::fields()) {
    if (ignore_mode && key == "sim.mode") continue;
    if (ignore_seed && key == "sim.seed") continue;
    if (key == "sim.threads") continue;
    text += key + "=" + field.get(cfg) + "\n";
  }
  return fnv1a(text);
}

}  // namespace dscd
