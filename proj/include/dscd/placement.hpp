#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "a2c.hpp"
#include "errors.hpp"
#include "rng.hpp"
#include "scheduler.hpp"
#include "traffic.hpp"

namespace dscd {

enum class Location : std::size_t { du = 0, cu = 1 };

inline std::string_view location_name(Location l) { return l == Location::du ? "du" : "cu"; }

struct PlacementConfig {
  std::int64_t cu_extra_delay_ttis = 2;
  bool coordination = true;
  std::int64_t epoch_length = 10;
  double tau = 0.5;
  double lambda = 0.5;
  bool training = true;
  double buffer_cap_bits = 100'000.0;
  // Each epoch is its own one-step episode (no bootstrap into the next epoch).
  bool episodic = true;

  void validate() const {
    if (cu_extra_delay_ttis < 0) throw ConfigError("placement.cu_extra_delay_ttis must be non-negative");
    if (epoch_length < 1) throw ConfigError("placement.epoch_length must be at least 1");
    if (tau < 0.0) throw ConfigError("placement.tau must be non-negative");
    if (lambda < 0.0) throw ConfigError("placement.lambda must be non-negative");
    if (!(buffer_cap_bits > 0.0)) throw ConfigError("placement.buffer_cap_bits must be positive");
  }
};

// Effective scheduling latency the placement adds to every packet's age.
inline std::int64_t extra_delay_ttis(Location l, const PlacementConfig& cfg) {
  return l == Location::cu ? cfg.cu_extra_delay_ttis : 0;
}

// tau * U * D + lambda * R3 for one traffic sample.
inline double dscd_reward(bool urllc, Location location, double r3, double tau, double lambda) {
  const double u = urllc ? 1.0 : 0.0;
  const double d = location == Location::du ? 1.0 : 0.0;
  return tau * (u * d) + lambda * r3;
}

// One packet handled by a DU's scheduler during an epoch. Dropped packets
// missed their budget and score R3 = 0.
struct TrafficSample {
  bool urllc = false;
  double hol_ms = 0.0;
  double budget_ms = 1.0;
  bool dropped = false;

  double r3() const { return dropped ? 0.0 : reward_r3(hol_ms, budget_ms); }
};

// Running reward average over the samples of one DU's epoch.
struct EpochAccumulator {
  std::uint64_t samples = 0;
  std::uint64_t urllc_samples = 0;
  double reward_sum = 0.0;
  std::uint64_t assigned_rbgs = 0;
  std::uint64_t interfered_rbgs = 0;

  void add(const TrafficSample& s, Location l, const PlacementConfig& cfg) {
    ++samples;
    if (s.urllc) ++urllc_samples;
    reward_sum += dscd_reward(s.urllc, l, s.r3(), cfg.tau, cfg.lambda);
  }
  std::optional<double> mean_reward() const {
    if (samples == 0) return std::nullopt;
    return reward_sum / static_cast<double>(samples);
  }
};

inline constexpr std::size_t kPlacementFeatures = 8;

// Queue-level view of one DU at an epoch boundary.
struct DuSnapshot {
  std::size_t du_id = 0;
  std::uint64_t queued_packets = 0;
  std::uint64_t queued_urllc_packets = 0;
  std::array<double, kNumClasses> hol_ratio_sum{};  // sum over backlogged UEs of HoL / budget
  std::array<std::uint64_t, kNumClasses> backlogged_ues{};
  std::uint64_t queued_bits = 0;
  Location location = Location::du;
  double cu_load = 0.0;               // share of DUs currently placed at the CU
  double interfered_fraction = 0.0;   // interfered share of assigned RBGs last epoch
};

inline Observation build_placement_observation(const DuSnapshot& s, const PlacementConfig& cfg) {
  Observation obs{std::vector<double>(kPlacementFeatures, 0.0)};
  auto& f = obs.features;
  f[0] = s.queued_packets == 0 ? 0.0
                               : static_cast<double>(s.queued_urllc_packets) / static_cast<double>(s.queued_packets);
  for (std::size_t c = 0; c < kNumClasses; ++c)
    f[1 + c] = s.backlogged_ues[c] == 0
                   ? 0.0
                   : std::clamp(s.hol_ratio_sum[c] / static_cast<double>(s.backlogged_ues[c]), 0.0, 1.0);
  f[4] = std::min(static_cast<double>(s.queued_bits) / cfg.buffer_cap_bits, 1.0);
  f[5] = s.location == Location::cu ? 1.0 : 0.0;
  f[6] = std::clamp(s.cu_load, 0.0, 1.0);
  f[7] = std::clamp(s.interfered_fraction, 0.0, 1.0);
  return obs;
}

struct PlacementStep {
  std::vector<Location> locations;           // one per DU
  std::vector<TransitionRecord> transitions; // completed transitions learned from this boundary
};

// Shared-parameter placement agent issuing one DU/CU action per DU per epoch.
// The transition for epoch k is completed (and learned) at boundary k + 1.
class PlacementController {
 public:
  PlacementController(const A2cConfig& agent_cfg, const PlacementConfig& cfg, std::size_t n_dus)
      : agent_(with_shape(agent_cfg)), cfg_(cfg), pending_(n_dus) {
    cfg_.validate();
  }

  const A2cAgent& agent() const { return agent_; }
  A2cAgent& agent() { return agent_; }

  // rewards[i] is DU i's averaged reward over the epoch just finished, absent
  // when it handled no traffic. pin forces the applied location (baseline check).
  PlacementStep placement_epoch(const std::vector<DuSnapshot>& snapshots,
                                const std::vector<std::optional<double>>& rewards, Rng& rng,
                                std::optional<Location> pin = std::nullopt) {
    if (snapshots.size() != pending_.size() || rewards.size() != pending_.size())
      throw ConfigError("placement epoch needs one snapshot and reward slot per DU");
    PlacementStep step;
    std::vector<Observation> observations;
    observations.reserve(snapshots.size());
    for (const auto& s : snapshots) observations.push_back(build_placement_observation(s, cfg_));

    for (std::size_t du = 0; du < pending_.size(); ++du) {
      if (!pending_[du] || !rewards[du]) continue;
      TransitionRecord t;
      t.obs = pending_[du]->obs;
      t.action_index = pending_[du]->action;
      t.reward = *rewards[du];
      t.next_obs = observations[du];
      t.terminal = cfg_.episodic;
      if (cfg_.training) agent_.learn(t);
      step.transitions.push_back(std::move(t));
    }

    const SelectMode mode = cfg_.training ? SelectMode::sample : SelectMode::greedy;
    for (std::size_t du = 0; du < pending_.size(); ++du) {
      const ActionDistribution dist = agent_.forward_actor(observations[du]);
      std::size_t action = select_action(dist, mode, rng);
      if (pin) action = static_cast<std::size_t>(*pin);
      pending_[du] = Pending{observations[du], action};
      step.locations.push_back(static_cast<Location>(action));
    }
    return step;
  }

 private:
  struct Pending {
    Observation obs;
    std::size_t action = 0;
  };

  static A2cConfig with_shape(A2cConfig cfg) {
    cfg.obs_dim = kPlacementFeatures;
    cfg.n_actions = 2;
    return cfg;
  }

  A2cAgent agent_;
  PlacementConfig cfg_;
  std::vector<std::optional<Pending>> pending_;
};

}  // namespace dscd
