#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "a2c.hpp"
#include "errors.hpp"
#include "ran.hpp"
#include "rng.hpp"
#include "traffic.hpp"

namespace dscd {

inline constexpr std::size_t kSchedulerFeaturesPerSlot = 5;

struct SchedulerConfig {
  std::size_t slots = 12;
  bool training = true;
  bool masking = true;
  double buffer_cap_bits = 20'000.0;  // queue depth that saturates the occupancy feature

  std::size_t obs_dim() const { return slots * kSchedulerFeaturesPerSlot; }

  void validate() const {
    if (slots == 0) throw ConfigError("scheduler.slots must be positive");
    if (!(buffer_cap_bits > 0.0)) throw ConfigError("scheduler.buffer_cap_bits must be positive");
  }
};

// What the scheduler knows about one UE at the start of a TTI.
struct UeSchedulingState {
  std::size_t ue_id = 0;
  std::vector<int> cqi;  // reported CQI per RBG
  double hol_ms = 0.0;   // effective head-of-line age
  double budget_ms = 1.0;
  int priority = 0;
  bool urllc = false;
  std::uint64_t backlog_bits = 0;
};

struct CellContext {
  std::size_t cell_id = 0;
  std::size_t n_rbg = 0;
  std::vector<UeSchedulingState> ues;
  // Filled only when the scheduler can see other cells' RBG maps: per RBG, the
  // priority of the most important UE another cell already placed there.
  std::vector<std::optional<int>> neighbor_priority;
  int interference_penalty = 3;
  std::size_t rbs_per_rbg = 1;

  bool coordinated() const { return !neighbor_priority.empty(); }
};

// ---- rewards ---------------------------------------------------------------

// 1 iff the chosen UE's CQI is strictly above the candidate mean.
inline int reward_r1(int cqi_k, const std::vector<int>& candidate_cqi) {
  if (candidate_cqi.empty()) throw ConfigError("reward_r1 needs at least one candidate");
  double sum = 0.0;
  for (int c : candidate_cqi) sum += c;
  const double diff = cqi_k - sum / static_cast<double>(candidate_cqi.size());
  const int sign = (diff > 0.0) - (diff < 0.0);
  return std::max(sign, 0);
}

inline int reward_r2(int qci) { return is_urllc_qci(qci) ? 1 : 0; }

// sinc(pi * floor(delay / budget)): 1 inside the budget, 0 at integer multiples past it.
inline double reward_r3(double hol_delay_ms, double budget_ms) {
  if (!(budget_ms > 0.0)) throw ConfigError("delay budget must be positive");
  const double n = std::floor(hol_delay_ms / budget_ms);
  if (n == 0.0) return 1.0;
  const double x = std::acos(-1.0) * n;
  // sin(pi n) evaluates to ~1e-16 rather than 0; the floor makes n integral.
  return std::abs(std::sin(x) / x) < 1e-12 ? 0.0 : std::sin(x) / x;
}

inline double scheduler_reward(int r1, int r2, double r3) { return r1 + r2 + r3; }

// ---- observation -----------------------------------------------------------

// Picks at most `slots` UEs (backlogged first, then most important, then longest
// HoL, then lowest id) and returns them in ascending UE-id order.
inline std::vector<UeSchedulingState> select_candidates(std::vector<UeSchedulingState> ues, std::size_t slots) {
  if (ues.size() > slots) {
    std::stable_sort(ues.begin(), ues.end(), [](const UeSchedulingState& a, const UeSchedulingState& b) {
      const bool ea = a.backlog_bits == 0, eb = b.backlog_bits == 0;
      if (ea != eb) return !ea;
      if (a.priority != b.priority) return a.priority < b.priority;
      if (a.hol_ms != b.hol_ms) return a.hol_ms > b.hol_ms;
      return a.ue_id < b.ue_id;
    });
    ues.resize(slots);
  }
  std::sort(ues.begin(), ues.end(), [](const auto& a, const auto& b) { return a.ue_id < b.ue_id; });
  return ues;
}

// CQI the scheduler believes a UE gets on rbg, including known neighbour use.
inline int visible_cqi(const CellContext& cell, const UeSchedulingState& ue, std::size_t rbg) {
  int c = ue.cqi.at(rbg);
  if (cell.coordinated() && cell.neighbor_priority[rbg]) c = std::max(kMinCqi, c - cell.interference_penalty);
  return c;
}

// Encodes candidates for one RBG. remaining_bits[i] is slot i's backlog not yet
// covered by earlier grants this TTI; a slot with none left is zero-filled.
inline Observation build_observation(const CellContext& cell, std::size_t rbg,
                                     const std::vector<UeSchedulingState>& candidates,
                                     const std::vector<std::uint64_t>& remaining_bits, const SchedulerConfig& cfg) {
  Observation obs{std::vector<double>(cfg.obs_dim(), 0.0)};
  for (std::size_t s = 0; s < candidates.size() && s < cfg.slots; ++s) {
    const auto& ue = candidates[s];
    if (remaining_bits[s] == 0) continue;
    double* f = obs.features.data() + s * kSchedulerFeaturesPerSlot;
    f[0] = static_cast<double>(visible_cqi(cell, ue, rbg)) / kMaxCqi;
    f[1] = std::min(ue.hol_ms / ue.budget_ms, 2.0) / 2.0;
    f[2] = std::clamp(1.0 - ue.priority / 100.0, 0.0, 1.0);
    f[3] = ue.urllc ? 1.0 : 0.0;
    f[4] = std::min(static_cast<double>(remaining_bits[s]) / cfg.buffer_cap_bits, 1.0);
  }
  return obs;
}

// ---- per-TTI scheduling ----------------------------------------------------

struct SchedulingDecision {
  std::size_t rbg = 0;
  std::size_t ue_id = 0;
  double probability = 0.0;  // policy probability of the chosen slot
  int r1 = 0;
  int r2 = 0;
  double r3 = 0.0;
  double reward = 0.0;
  bool assigned = true;  // false when an unmasked policy picked an idle slot
};

struct ScheduleOutcome {
  RbgAllocation allocation;
  std::vector<SchedulingDecision> decisions;
  std::vector<TransitionRecord> transitions;
};

// One decision per RBG in index order. Transitions chain within the TTI; the
// last one is terminal. Learning runs after all RBGs are decided.
inline ScheduleOutcome schedule_tti(A2cAgent& agent, const CellContext& cell, const SchedulerConfig& cfg, Rng& rng) {
  if (agent.obs_dim() != cfg.obs_dim() || agent.n_actions() != cfg.slots)
    throw ConfigError("scheduler agent shape does not match the slot configuration");
  ScheduleOutcome out;
  out.allocation = RbgAllocation(cell.cell_id, cell.n_rbg);

  const auto candidates = select_candidates(cell.ues, cfg.slots);
  std::vector<std::uint64_t> remaining(candidates.size());
  for (std::size_t s = 0; s < candidates.size(); ++s) remaining[s] = candidates[s].backlog_bits;

  const SelectMode mode = cfg.training ? SelectMode::sample : SelectMode::greedy;

  for (std::size_t r = 0; r < cell.n_rbg; ++r) {
    std::vector<bool> valid(cfg.slots, false);
    bool any = false;
    std::vector<int> backlogged_cqi;
    for (std::size_t s = 0; s < candidates.size(); ++s) {
      const auto& ue = candidates[s];
      if (ue.backlog_bits > 0) backlogged_cqi.push_back(visible_cqi(cell, ue, r));
      if (remaining[s] == 0) continue;
      if (cell.coordinated() && cell.neighbor_priority[r] && *cell.neighbor_priority[r] <= ue.priority) continue;
      valid[s] = true;
      any = true;
    }
    if (!any) continue;

    Observation obs = build_observation(cell, r, candidates, remaining, cfg);
    const ActionDistribution dist = cfg.masking ? agent.forward_actor(obs, valid) : agent.forward_actor(obs);
    const std::size_t slot = select_action(dist, mode, rng);

    SchedulingDecision d;
    d.rbg = r;
    d.probability = dist[slot];
    if (slot < candidates.size() && valid[slot]) {
      const auto& ue = candidates[slot];
      const int cqi = visible_cqi(cell, ue, r);
      d.ue_id = ue.ue_id;
      d.r1 = reward_r1(cqi, backlogged_cqi);
      d.r2 = ue.urllc ? 1 : 0;
      d.r3 = reward_r3(ue.hol_ms, ue.budget_ms);
      d.reward = scheduler_reward(d.r1, d.r2, d.r3);
      out.allocation.ue_per_rbg[r] = ue.ue_id;
      const std::uint64_t cap = rbg_capacity(cqi, cell.rbs_per_rbg);
      remaining[slot] = remaining[slot] > cap ? remaining[slot] - cap : 0;
    } else {
      d.assigned = false;
    }

    if (!out.transitions.empty()) out.transitions.back().next_obs = obs;
    TransitionRecord t;
    t.obs = std::move(obs);
    t.action_index = slot;
    t.reward = d.reward;
    t.terminal = false;
    if (cfg.masking) t.action_mask = std::move(valid);
    out.transitions.push_back(std::move(t));
    out.decisions.push_back(d);
  }

  if (!out.transitions.empty()) {
    out.transitions.back().terminal = true;
    out.transitions.back().next_obs = out.transitions.back().obs;
  }
  if (cfg.training)
    for (const auto& t : out.transitions) agent.learn(t);
  return out;
}

}  // namespace dscd
