#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"
#include "traffic.hpp"

namespace dscd {

struct Position {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Position&) const = default;
};

inline double distance(Position a, Position b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Arena {
  double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;

  bool contains(Position p) const { return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y; }
  Position clamp(Position p) const { return {std::clamp(p.x, min_x, max_x), std::clamp(p.y, min_y, max_y)}; }
};

struct Cell {
  std::size_t id = 0;
  Position pos;
  std::size_t n_rbg = 1;
  std::size_t du_id = 0;
};

struct Ue {
  std::size_t id = 0;
  Position pos;
  std::size_t serving_cell = 0;
  Position velocity;  // m/s, zero for fixed UEs
  Position waypoint;
  double speed_mps = 0.0;
  FlowSpec flow;
  std::vector<int> cqi;  // per RBG of the serving cell, each in [1, 15]
};

struct ChannelConfig {
  double path_loss_exponent = 3.5;
  double reference_distance_m = 20.0;  // CQI 15 at or inside this distance
  double max_radius_m = 600.0;         // CQI 1 at or beyond this distance
  bool shadowing = true;
  double shadowing_sigma_db = 4.0;
  int interference_penalty = 3;
  std::size_t rbs_per_rbg = 3;

  void validate() const {
    if (!(path_loss_exponent > 0.0)) throw ConfigError("channel.path_loss_exponent must be positive");
    if (!(reference_distance_m > 0.0)) throw ConfigError("channel.reference_distance_m must be positive");
    if (!(max_radius_m > reference_distance_m))
      throw ConfigError("channel.max_radius_m must exceed channel.reference_distance_m");
    if (shadowing_sigma_db < 0.0) throw ConfigError("channel.shadowing_sigma_db must be non-negative");
    if (interference_penalty < 0 || interference_penalty > 14)
      throw ConfigError("channel.interference_penalty must lie in [0, 14]");
    if (rbs_per_rbg == 0) throw ConfigError("channel.rbs_per_rbg must be positive");
  }
};

inline constexpr int kMinCqi = 1;
inline constexpr int kMaxCqi = 15;

// Spectral efficiency (bits per resource element) for CQI 1..15, 4-bit CQI table.
inline constexpr std::array<double, 15> kCqiSpectralEfficiency{
    0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.9141,
    2.4063, 2.7305, 3.3223, 3.9023, 4.5234, 5.1152, 5.5547};

inline constexpr std::size_t kSubcarriersPerRb = 12;
inline constexpr std::size_t kSymbolsPerTti = 14;

// Bits one RBG carries in one TTI at the given CQI.
inline std::uint64_t rbg_capacity(int cqi, std::size_t rbs_per_rbg) {
  if (cqi < kMinCqi || cqi > kMaxCqi) throw ConfigError("CQI " + std::to_string(cqi) + " outside [1, 15]");
  const double res = static_cast<double>(kSubcarriersPerRb * kSymbolsPerTti * rbs_per_rbg);
  return static_cast<std::uint64_t>(std::floor(kCqiSpectralEfficiency[static_cast<std::size_t>(cqi - 1)] * res));
}

// Log-distance path loss relative to the reference distance, in dB.
inline double path_loss_db(double d, const ChannelConfig& ch) {
  return 10.0 * ch.path_loss_exponent * std::log10(std::max(d, ch.reference_distance_m) / ch.reference_distance_m);
}

// Maps SNR margin linearly in dB onto 1..15 between the far and near anchors.
inline int cqi_from_margin_db(double margin_db, const ChannelConfig& ch) {
  const double span = path_loss_db(ch.max_radius_m, ch);
  const double level = 1.0 + 14.0 * margin_db / span;
  return static_cast<int>(std::clamp<long>(std::lround(level), kMinCqi, kMaxCqi));
}

// Per-(cell, rbg) list of other cells that use the same RBG this TTI.
class InterferenceView {
 public:
  InterferenceView() = default;
  InterferenceView(std::size_t n_cells, std::size_t n_rbg)
      : n_rbg_(n_rbg), neighbors_(n_cells * n_rbg) {}

  std::size_t n_cells() const { return n_rbg_ == 0 ? 0 : neighbors_.size() / n_rbg_; }
  std::size_t n_rbg() const { return n_rbg_; }
  const std::vector<std::size_t>& neighbors(std::size_t cell, std::size_t rbg) const {
    return neighbors_.at(cell * n_rbg_ + rbg);
  }
  std::vector<std::size_t>& neighbors(std::size_t cell, std::size_t rbg) { return neighbors_.at(cell * n_rbg_ + rbg); }
  bool interfered(std::size_t cell, std::size_t rbg) const {
    return cell < n_cells() && rbg < n_rbg_ && !neighbors(cell, rbg).empty();
  }
  bool empty() const {
    return std::all_of(neighbors_.begin(), neighbors_.end(), [](const auto& v) { return v.empty(); });
  }
  std::size_t interfered_count() const {
    return static_cast<std::size_t>(
        std::count_if(neighbors_.begin(), neighbors_.end(), [](const auto& v) { return !v.empty(); }));
  }

 private:
  std::size_t n_rbg_ = 0;
  std::vector<std::vector<std::size_t>> neighbors_;
};

// CQI per RBG for ue served by cell. Interfered RBGs lose the configured penalty (floor 1).
inline std::vector<int> compute_cqi(const Ue& ue, const Cell& cell, const InterferenceView& interference, Rng* rng,
                                    const ChannelConfig& ch) {
  const double d = distance(ue.pos, cell.pos);
  const double margin = path_loss_db(ch.max_radius_m, ch) - path_loss_db(d, ch);
  std::vector<int> cqi(cell.n_rbg);
  std::normal_distribution<double> shadow(0.0, ch.shadowing_sigma_db);
  for (std::size_t r = 0; r < cell.n_rbg; ++r) {
    double m = margin;
    if (ch.shadowing && rng != nullptr && ch.shadowing_sigma_db > 0.0) m += shadow(*rng);
    int c = cqi_from_margin_db(m, ch);
    if (interference.interfered(cell.id, r)) c = std::max(kMinCqi, c - ch.interference_penalty);
    cqi[r] = c;
  }
  return cqi;
}

// One cell's RBG map for one TTI.
struct RbgAllocation {
  std::size_t cell_id = 0;
  std::vector<std::optional<std::size_t>> ue_per_rbg;

  RbgAllocation() = default;
  RbgAllocation(std::size_t cell, std::size_t n_rbg) : cell_id(cell), ue_per_rbg(n_rbg) {}

  std::size_t assigned_count() const {
    return static_cast<std::size_t>(
        std::count_if(ue_per_rbg.begin(), ue_per_rbg.end(), [](const auto& u) { return u.has_value(); }));
  }
  bool operator==(const RbgAllocation&) const = default;
};

inline InterferenceView build_interference_view(const std::vector<RbgAllocation>& allocations, std::size_t n_cells) {
  std::size_t n_rbg = 0;
  for (const auto& a : allocations) n_rbg = std::max(n_rbg, a.ue_per_rbg.size());
  InterferenceView view(n_cells, n_rbg);
  for (const auto& a : allocations) {
    if (a.cell_id >= n_cells) throw ConfigError("allocation for unknown cell");
    for (std::size_t r = 0; r < a.ue_per_rbg.size(); ++r) {
      if (!a.ue_per_rbg[r]) continue;
      for (const auto& b : allocations)
        if (b.cell_id != a.cell_id && r < b.ue_per_rbg.size() && b.ue_per_rbg[r])
          view.neighbors(a.cell_id, r).push_back(b.cell_id);
    }
  }
  return view;
}

// Cells on a near-square grid with the given spacing; the arena is the grid's cell footprint.
struct Topology {
  std::vector<Cell> cells;
  Arena arena;
};

inline Topology grid_topology(std::size_t n_cells, std::size_t n_rbg, double spacing_m) {
  if (n_cells == 0) throw ConfigError("sim.n_cells must be positive");
  if (n_rbg == 0) throw ConfigError("sim.n_rbg must be positive");
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_cells))));
  const std::size_t rows = (n_cells + cols - 1) / cols;
  Topology t;
  for (std::size_t i = 0; i < n_cells; ++i) {
    const double x = spacing_m * (0.5 + static_cast<double>(i % cols));
    const double y = spacing_m * (0.5 + static_cast<double>(i / cols));
    t.cells.push_back(Cell{i, {x, y}, n_rbg, i});
  }
  t.arena = Arena{0.0, 0.0, spacing_m * static_cast<double>(cols), spacing_m * static_cast<double>(rows)};
  return t;
}

// Nearest cell, lowest id on ties.
inline std::size_t nearest_cell(Position p, const std::vector<Cell>& cells) {
  std::size_t best = 0;
  double best_d = HUGE_VAL;
  for (const auto& c : cells) {
    const double d = distance(p, c.pos);
    if (d < best_d) {
      best_d = d;
      best = c.id;
    }
  }
  return best;
}

inline Position random_point(const Arena& arena, Rng& rng) {
  const double x = uniform(rng, arena.min_x, arena.max_x);
  const double y = uniform(rng, arena.min_y, arena.max_y);
  return {x, y};
}

inline void head_towards(Ue& ue, Position target) {
  const double d = distance(ue.pos, target);
  ue.waypoint = target;
  if (d == 0.0) {
    ue.velocity = {};
    return;
  }
  ue.velocity = {ue.speed_mps * (target.x - ue.pos.x) / d, ue.speed_mps * (target.y - ue.pos.y) / d};
}

// Random-waypoint step of one TTI followed by nearest-cell reselection.
inline void step_mobility(Ue& ue, double tti_ms, const Arena& arena, const std::vector<Cell>& cells, Rng& rng) {
  const double dt = tti_ms / 1000.0;
  const double vx = ue.velocity.x, vy = ue.velocity.y;
  if (vx == 0.0 && vy == 0.0 && ue.speed_mps == 0.0) return;
  const double step = std::hypot(vx, vy) * dt;
  const double to_waypoint = distance(ue.pos, ue.waypoint);
  if (step >= to_waypoint) {
    ue.pos = ue.waypoint;
    if (ue.speed_mps > 0.0) head_towards(ue, random_point(arena, rng));
  } else {
    ue.pos = {ue.pos.x + vx * dt, ue.pos.y + vy * dt};
  }
  ue.pos = arena.clamp(ue.pos);
  if (!cells.empty()) ue.serving_cell = nearest_cell(ue.pos, cells);
}

}  // namespace dscd
