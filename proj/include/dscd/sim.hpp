#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "a2c.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "metrics.hpp"
#include "placement.hpp"
#include "ran.hpp"
#include "rng.hpp"
#include "scheduler.hpp"
#include "traffic.hpp"

namespace dscd {

struct ClassCounters {
  std::uint64_t arrived = 0, delivered = 0, dropped = 0;
  std::uint64_t arrived_bits = 0, delivered_bits = 0, dropped_bits = 0;
};

// Read-only view of one finished TTI, for audits and tests.
struct TtiRecord {
  std::int64_t tti = 0;
  const std::vector<Ue>* ues = nullptr;
  const std::vector<RlcQueue>* queues = nullptr;
  const std::vector<RbgAllocation>* allocations = nullptr;
  const InterferenceView* interference = nullptr;
  const std::vector<Location>* locations = nullptr;
  const std::array<ClassCounters, kNumClasses>* totals = nullptr;
  const std::vector<DeliveredPacket>* delivered = nullptr;  // this TTI
  const std::vector<std::size_t>* delivered_ue = nullptr;   // serving UE of each delivered packet
};

using TtiObserver = std::function<void(const TtiRecord&)>;

struct RunOptions {
  // Applied placement is forced to this location while the DSCD agent still runs.
  std::optional<Location> pin_placement;
  TtiObserver observer;
};

inline std::uint64_t run_seed(const SimConfig& cfg, std::size_t run_index) { return cfg.seed + run_index; }

// One independent simulation run: UEs, queues, both learning agents and the ledger.
class Simulation {
 public:
  Simulation(const SimConfig& cfg, std::uint64_t seed, RunOptions options = {})
      : cfg_(cfg),
        seed_(seed),
        options_(std::move(options)),
        channel_rng_(make_stream(seed, "channel")),
        traffic_rng_(make_stream(seed, "traffic")),
        scheduler_rng_(make_stream(seed, "actor-sampling")),
        placement_rng_(make_stream(seed, "placement-sampling")),
        mobility_rng_(make_stream(seed, "mobility")) {
    cfg_.validate();
    topology_ = grid_topology(cfg_.n_cells, cfg_.n_rbg, cfg_.cell_spacing_m);
    place_ues();
    build_agents();
    locations_.assign(cfg_.n_cells, initial_location());
    epoch_acc_.assign(cfg_.n_cells, EpochAccumulator{});
    epoch_location_ = locations_;
    ledger_.window_ttis = cfg_.window_ttis;
    ledger_.tti_ms = cfg_.tti_ms;
  }

  const SimConfig& config() const { return cfg_; }
  const std::vector<Ue>& ues() const { return ues_; }
  const std::vector<RlcQueue>& queues() const { return queues_; }
  const std::vector<Cell>& cells() const { return topology_.cells; }
  const std::vector<Location>& locations() const { return locations_; }
  const MetricsLedger& ledger() const { return ledger_; }
  const A2cAgent& du_scheduler(std::size_t cell) const { return du_agents_.at(cell); }
  const A2cAgent& cu_scheduler() const { return *cu_agent_; }
  const PlacementController* placement() const { return placement_.get(); }
  std::int64_t now() const { return now_; }

  MetricsLedger run() {
    while (now_ < cfg_.total_ttis) step();
    close_epoch();
    return ledger_;
  }

  void step() {
    const std::int64_t t = now_;
    WindowStats& window = ledger_.window_for(t);
    ++window.ttis;

    for (auto& ue : ues_) step_mobility(ue, cfg_.tti_ms, topology_.arena, topology_.cells, mobility_rng_);

    for (std::size_t i = 0; i < ues_.size(); ++i) {
      for (const auto& p : generate_arrivals(queues_[i].flow(), t, cfg_.tti_ms, traffic_rng_, rate_scale_)) {
        queues_[i].push(p);
        auto& cs = window.classes[index_of(ues_[i].flow.traffic)];
        ++cs.arrivals;
        cs.arrival_bits += p.size_bits;
        auto& tot = totals_[index_of(ues_[i].flow.traffic)];
        ++tot.arrived;
        tot.arrived_bits += p.size_bits;
      }
    }

    if (t % cfg_.placement.epoch_length == 0) placement_boundary(t);

    // Expiry runs with the placement now in force, before the scheduler looks at queues.
    for (std::size_t i = 0; i < ues_.size(); ++i) {
      const std::size_t cell = ues_[i].serving_cell;
      const Location loc = locations_[cell];
      for (const auto& p : queues_[i].drop_expired(t, extra_delay_ttis(loc, cfg_.placement)))
        record_drop(window, i, p, cell, loc);
    }

    const InterferenceView none;
    for (auto& ue : ues_)
      ue.cqi = compute_cqi(ue, topology_.cells[ue.serving_cell], none, &channel_rng_, cfg_.channel);

    schedule_all(t);

    const InterferenceView view = build_interference_view(allocations_, cfg_.n_cells);
    for (const auto& a : allocations_) {
      const auto assigned = a.assigned_count();
      std::size_t hit = 0;
      for (std::size_t r = 0; r < a.ue_per_rbg.size(); ++r)
        if (a.ue_per_rbg[r] && view.interfered(a.cell_id, r)) ++hit;
      window.assigned_rbgs += assigned;
      window.interfered_rbgs += hit;
      epoch_acc_[a.cell_id].assigned_rbgs += assigned;
      epoch_acc_[a.cell_id].interfered_rbgs += hit;
    }

    delivered_.clear();
    delivered_ue_.clear();
    std::vector<std::uint64_t> grant(ues_.size(), 0);
    for (const auto& a : allocations_) {
      for (std::size_t r = 0; r < a.ue_per_rbg.size(); ++r) {
        if (!a.ue_per_rbg[r]) continue;
        const std::size_t u = *a.ue_per_rbg[r];
        int cqi = ues_[u].cqi[r];
        if (view.interfered(a.cell_id, r)) cqi = std::max(kMinCqi, cqi - cfg_.channel.interference_penalty);
        grant[u] += rbg_capacity(cqi, cfg_.channel.rbs_per_rbg);
      }
    }
    for (std::size_t i = 0; i < ues_.size(); ++i) {
      if (grant[i] == 0) continue;
      const std::size_t cell = ues_[i].serving_cell;
      const Location loc = locations_[cell];
      auto served = queues_[i].serve(grant[i], t, extra_delay_ttis(loc, cfg_.placement));
      for (const auto& d : served.delivered) record_delivery(window, i, d, cell, loc);
      for (const auto& p : served.expired) record_drop(window, i, p, cell, loc);
    }

    if (cfg_.audit) audit(t);
    if (options_.observer) {
      TtiRecord rec{t, &ues_, &queues_, &allocations_, &view, &locations_, &totals_, &delivered_, &delivered_ue_};
      options_.observer(rec);
    }
    ++now_;
  }

 private:
  Location initial_location() const { return cfg_.mode == Mode::nf_cu ? Location::cu : Location::du; }

  std::uint64_t agent_seed(std::string_view name) const { return seed_ ^ fnv1a(name); }

  void place_ues() {
    Rng rng = make_stream(seed_, "topology");
    const std::size_t n = cfg_.n_ues;
    std::size_t n_vehicles = 0;
    if (cfg_.scenario == Scenario::mobile)
      n_vehicles = static_cast<std::size_t>(std::lround(cfg_.vehicle_ratio * static_cast<double>(n)));
    std::size_t n_ar = static_cast<std::size_t>(std::lround(cfg_.urllc_density * static_cast<double>(n)));
    n_ar = std::min(n_ar, n - n_vehicles);

    std::vector<TrafficClass> classes(n, TrafficClass::video);
    for (std::size_t i = 0; i < n_vehicles; ++i) classes[i] = TrafficClass::v2x;
    for (std::size_t i = 0; i < n_ar; ++i) classes[n_vehicles + i] = TrafficClass::ar;
    std::shuffle(classes.begin(), classes.end(), rng);

    double expected_packets = 0.0;
    for (auto c : classes)
      expected_packets += cfg_.traffic.rate_kbps(c) * cfg_.tti_ms / cfg_.traffic.packet_size_bits;
    rate_scale_ = expected_packets > cfg_.traffic.streams_per_tti ? cfg_.traffic.streams_per_tti / expected_packets : 1.0;

    for (std::size_t i = 0; i < n; ++i) {
      Ue ue;
      ue.id = i;
      ue.pos = random_point(topology_.arena, rng);
      ue.serving_cell = nearest_cell(ue.pos, topology_.cells);
      ue.flow = standard_flow(classes[i], cfg_.traffic.rate_kbps(classes[i]) * 1000.0, cfg_.traffic.packet_size_bits);
      ue.waypoint = ue.pos;
      if (classes[i] == TrafficClass::v2x && cfg_.scenario == Scenario::mobile) {
        ue.speed_mps = cfg_.vehicle_speed_mps;
        head_towards(ue, random_point(topology_.arena, rng));
      }
      ues_.push_back(ue);
      queues_.emplace_back(ue.flow, cfg_.tti_ms);
    }
  }

  void build_agents() {
    const std::size_t obs = cfg_.scheduler.obs_dim();
    for (std::size_t c = 0; c < cfg_.n_cells; ++c)
      du_agents_.emplace_back(cfg_.agent_config(obs, cfg_.scheduler.slots, agent_seed("scheduler-du-" + std::to_string(c))));
    cu_agent_ = std::make_unique<A2cAgent>(cfg_.agent_config(obs, cfg_.scheduler.slots, agent_seed("scheduler-cu")));
    if (cfg_.mode == Mode::dscd)
      placement_ = std::make_unique<PlacementController>(
          cfg_.agent_config(kPlacementFeatures, 2, agent_seed("placement")), cfg_.placement, cfg_.n_cells);
  }

  void record_delivery(WindowStats& w, std::size_t ue, const DeliveredPacket& d, std::size_t cell, Location loc) {
    const auto& flow = ues_[ue].flow;
    auto& cs = w.classes[index_of(flow.traffic)];
    ++cs.delivered;
    cs.delivered_bits += d.packet.size_bits;
    cs.hol_sum_ms += d.hol_ms;
    (loc == Location::du ? cs.du_samples : cs.cu_samples)++;
    auto& tot = totals_[index_of(flow.traffic)];
    ++tot.delivered;
    tot.delivered_bits += d.packet.size_bits;
    epoch_acc_[cell].add(TrafficSample{flow.is_urllc, d.hol_ms, flow.delay_budget_ms, false}, loc, cfg_.placement);
    delivered_.push_back(d);
    delivered_ue_.push_back(ue);
  }

  void record_drop(WindowStats& w, std::size_t ue, const Packet& p, std::size_t cell, Location loc) {
    const auto& flow = ues_[ue].flow;
    auto& cs = w.classes[index_of(flow.traffic)];
    ++cs.dropped;
    cs.dropped_bits += p.size_bits;
    (loc == Location::du ? cs.du_samples : cs.cu_samples)++;
    auto& tot = totals_[index_of(flow.traffic)];
    ++tot.dropped;
    tot.dropped_bits += p.size_bits;
    epoch_acc_[cell].add(TrafficSample{flow.is_urllc, 0.0, flow.delay_budget_ms, true}, loc, cfg_.placement);
  }

  void close_epoch() {
    if (!epoch_open_) return;
    for (std::size_t du = 0; du < cfg_.n_cells; ++du) {
      const auto& acc = epoch_acc_[du];
      ledger_.epochs.push_back(
          EpochRecord{epoch_start_, du, epoch_location_[du], acc.samples, acc.urllc_samples, acc.reward_sum});
    }
    epoch_open_ = false;
  }

  std::vector<DuSnapshot> snapshots(std::int64_t t) const {
    std::vector<DuSnapshot> out(cfg_.n_cells);
    std::size_t at_cu = 0;
    for (auto l : locations_)
      if (l == Location::cu) ++at_cu;
    for (std::size_t du = 0; du < cfg_.n_cells; ++du) {
      out[du].du_id = du;
      out[du].location = locations_[du];
      out[du].cu_load = static_cast<double>(at_cu) / static_cast<double>(cfg_.n_cells);
      const auto& acc = epoch_acc_[du];
      out[du].interfered_fraction =
          acc.assigned_rbgs == 0 ? 0.0 : static_cast<double>(acc.interfered_rbgs) / static_cast<double>(acc.assigned_rbgs);
    }
    for (std::size_t i = 0; i < ues_.size(); ++i) {
      auto& s = out[ues_[i].serving_cell];
      const auto& q = queues_[i];
      if (q.empty()) continue;
      const auto& flow = q.flow();
      s.queued_packets += q.size();
      if (flow.is_urllc) s.queued_urllc_packets += q.size();
      s.queued_bits += q.backlog_bits();
      const auto c = index_of(flow.traffic);
      s.hol_ratio_sum[c] += q.hol_delay_ms(t, extra_delay_ttis(s.location, cfg_.placement)) / flow.delay_budget_ms;
      ++s.backlogged_ues[c];
    }
    return out;
  }

  void placement_boundary(std::int64_t t) {
    std::vector<std::optional<double>> rewards(cfg_.n_cells);
    for (std::size_t du = 0; du < cfg_.n_cells; ++du) rewards[du] = epoch_acc_[du].mean_reward();
    const auto snaps = snapshots(t);
    close_epoch();

    if (placement_) {
      auto step = placement_->placement_epoch(snaps, rewards, placement_rng_, options_.pin_placement);
      locations_ = step.locations;
    } else {
      locations_.assign(cfg_.n_cells, initial_location());
    }
    epoch_acc_.assign(cfg_.n_cells, EpochAccumulator{});
    epoch_location_ = locations_;
    epoch_start_ = t;
    epoch_open_ = true;
  }

  UeSchedulingState scheduling_state(std::size_t i, std::int64_t t, Location loc) const {
    const auto& q = queues_[i];
    UeSchedulingState s;
    s.ue_id = i;
    s.cqi = ues_[i].cqi;
    s.hol_ms = q.hol_delay_ms(t, extra_delay_ttis(loc, cfg_.placement));
    s.budget_ms = q.flow().delay_budget_ms;
    s.priority = q.flow().priority;
    s.urllc = q.flow().is_urllc;
    s.backlog_bits = q.backlog_bits();
    return s;
  }

  // Edge-placed schedulers decide first, in cell order; CU-placed ones follow in
  // DU order and see the RBG maps of the CU-attached cells decided before them.
  void schedule_all(std::int64_t t) {
    allocations_.clear();
    std::vector<std::size_t> order;
    for (std::size_t c = 0; c < cfg_.n_cells; ++c)
      if (locations_[c] == Location::du) order.push_back(c);
    for (std::size_t c = 0; c < cfg_.n_cells; ++c)
      if (locations_[c] == Location::cu) order.push_back(c);

    for (std::size_t c : order) {
      const Location loc = locations_[c];
      CellContext ctx;
      ctx.cell_id = c;
      ctx.n_rbg = topology_.cells[c].n_rbg;
      ctx.interference_penalty = cfg_.channel.interference_penalty;
      ctx.rbs_per_rbg = cfg_.channel.rbs_per_rbg;
      for (std::size_t i = 0; i < ues_.size(); ++i)
        if (ues_[i].serving_cell == c) ctx.ues.push_back(scheduling_state(i, t, loc));
      if (loc == Location::cu && cfg_.placement.coordination) {
        ctx.neighbor_priority.assign(ctx.n_rbg, std::nullopt);
        for (const auto& a : allocations_) {
          if (locations_[a.cell_id] != Location::cu) continue;
          for (std::size_t r = 0; r < a.ue_per_rbg.size() && r < ctx.n_rbg; ++r) {
            if (!a.ue_per_rbg[r]) continue;
            const int p = ues_[*a.ue_per_rbg[r]].flow.priority;
            auto& slot = ctx.neighbor_priority[r];
            if (!slot || p < *slot) slot = p;
          }
        }
      }
      A2cAgent& agent = loc == Location::du ? du_agents_[c] : *cu_agent_;
      auto outcome = schedule_tti(agent, ctx, cfg_.scheduler, scheduler_rng_);
      allocations_.push_back(std::move(outcome.allocation));
    }
    std::sort(allocations_.begin(), allocations_.end(),
              [](const RbgAllocation& a, const RbgAllocation& b) { return a.cell_id < b.cell_id; });
  }

  void audit(std::int64_t t) const {
    for (const auto& a : allocations_)
      for (const auto& u : a.ue_per_rbg)
        if (u && ues_[*u].serving_cell != a.cell_id)
          throw InvariantViolation("TTI " + std::to_string(t) + ": RBG assigned to a UE of another cell");
    std::array<std::uint64_t, kNumClasses> queued{}, queued_bits{};
    for (const auto& q : queues_) {
      queued[index_of(q.flow().traffic)] += q.size();
      queued_bits[index_of(q.flow().traffic)] += q.queued_size_bits();
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const auto& tot = totals_[c];
      if (tot.arrived != tot.delivered + tot.dropped + queued[c] ||
          tot.arrived_bits != tot.delivered_bits + tot.dropped_bits + queued_bits[c])
        throw InvariantViolation("TTI " + std::to_string(t) + ": packet conservation broken for class " +
                                 std::string(class_name(kAllClasses[c])));
    }
    for (std::size_t k = 0; k < delivered_.size(); ++k)
      if (delivered_[k].hol_ms > ues_[delivered_ue_[k]].flow.delay_budget_ms)
        throw InvariantViolation("TTI " + std::to_string(t) + ": delivered packet exceeded its budget");
  }

  SimConfig cfg_;
  std::uint64_t seed_;
  RunOptions options_;
  Rng channel_rng_, traffic_rng_, scheduler_rng_, placement_rng_, mobility_rng_;

  Topology topology_;
  std::vector<Ue> ues_;
  std::vector<RlcQueue> queues_;
  double rate_scale_ = 1.0;

  std::vector<A2cAgent> du_agents_;
  std::unique_ptr<A2cAgent> cu_agent_;
  std::unique_ptr<PlacementController> placement_;

  std::vector<Location> locations_;
  std::vector<Location> epoch_location_;
  std::vector<EpochAccumulator> epoch_acc_;
  std::int64_t epoch_start_ = 0;
  bool epoch_open_ = false;

  std::vector<RbgAllocation> allocations_;
  std::vector<DeliveredPacket> delivered_;
  std::vector<std::size_t> delivered_ue_;
  std::array<ClassCounters, kNumClasses> totals_{};
  MetricsLedger ledger_;
  std::int64_t now_ = 0;
};

// ---- batches -----------------------------------------------------------------

struct AggregateRow {
  std::int64_t window_start_tti = 0;
  TrafficClass traffic = TrafficClass::video;
  std::optional<double> mean_hol_ms, pdr, throughput_kbps, du_ratio, cu_ratio;
};

struct ClassSummary {
  TrafficClass traffic = TrafficClass::video;
  std::optional<double> mean_hol_ms, pdr, throughput_kbps, du_ratio, cu_ratio;
};

struct BatchResult {
  std::vector<MetricsLedger> runs;
  std::vector<AggregateRow> aggregate;     // per-window mean across runs
  std::vector<ClassSummary> summary;       // tail-window metrics, mean across runs
};

inline std::optional<double> mean_of(const std::vector<std::optional<double>>& xs) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& x : xs)
    if (x) s += *x, ++n;
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

// Classes that can carry traffic under cfg; rows are emitted only for these.
inline std::vector<TrafficClass> active_classes(const SimConfig& cfg) {
  std::vector<TrafficClass> out{TrafficClass::video, TrafficClass::ar};
  if (cfg.scenario == Scenario::mobile) out.push_back(TrafficClass::v2x);
  return out;
}

inline std::vector<AggregateRow> per_window_rows(const MetricsLedger& l, const std::vector<TrafficClass>& classes) {
  std::vector<AggregateRow> rows;
  for (std::size_t w = 0; w < l.windows.size(); ++w)
    for (auto c : classes) {
      const auto range = WindowRange::single(w);
      AggregateRow r;
      r.window_start_tti = l.windows[w].start_tti;
      r.traffic = c;
      r.mean_hol_ms = mean_hol(l, c, range);
      r.pdr = pdr(l, c, range);
      r.throughput_kbps = throughput_kbps(l, c, range);
      if (auto ratio = relocation_ratio(l, c, range)) r.du_ratio = ratio->du, r.cu_ratio = ratio->cu;
      rows.push_back(r);
    }
  return rows;
}

inline ClassSummary summarize(const MetricsLedger& l, TrafficClass c, double tail_fraction) {
  const auto range = WindowRange::tail(l, tail_fraction);
  ClassSummary s;
  s.traffic = c;
  s.mean_hol_ms = mean_hol(l, c, range);
  s.pdr = pdr(l, c, range);
  s.throughput_kbps = throughput_kbps(l, c, range);
  if (auto ratio = relocation_ratio(l, c, range)) s.du_ratio = ratio->du, s.cu_ratio = ratio->cu;
  return s;
}

inline void aggregate_runs(const SimConfig& cfg, BatchResult& b) {
  const auto classes = active_classes(cfg);
  std::vector<std::vector<AggregateRow>> per_run;
  for (const auto& l : b.runs) per_run.push_back(per_window_rows(l, classes));
  b.aggregate.clear();
  if (!per_run.empty()) {
    const std::size_t n_rows = per_run.front().size();
    for (std::size_t i = 0; i < n_rows; ++i) {
      AggregateRow r = per_run.front()[i];
      std::vector<std::optional<double>> hol, p, thr, du, cu;
      for (const auto& run : per_run) {
        hol.push_back(run[i].mean_hol_ms);
        p.push_back(run[i].pdr);
        thr.push_back(run[i].throughput_kbps);
        du.push_back(run[i].du_ratio);
        cu.push_back(run[i].cu_ratio);
      }
      r.mean_hol_ms = mean_of(hol), r.pdr = mean_of(p), r.throughput_kbps = mean_of(thr);
      r.du_ratio = mean_of(du), r.cu_ratio = mean_of(cu);
      b.aggregate.push_back(r);
    }
  }
  b.summary.clear();
  for (auto c : classes) {
    std::vector<std::optional<double>> hol, p, thr, du, cu;
    for (const auto& l : b.runs) {
      const auto s = summarize(l, c, cfg.tail_fraction);
      hol.push_back(s.mean_hol_ms), p.push_back(s.pdr), thr.push_back(s.throughput_kbps);
      du.push_back(s.du_ratio), cu.push_back(s.cu_ratio);
    }
    b.summary.push_back({c, mean_of(hol), mean_of(p), mean_of(thr), mean_of(du), mean_of(cu)});
  }
}

// Runs cfg.n_runs independent simulations with seeds seed + i. Runs may execute
// on several threads; results are collected and reduced in run-index order.
inline BatchResult run(const SimConfig& cfg, const RunOptions& options = {}) {
  cfg.validate();
  BatchResult b;
  b.runs.resize(cfg.n_runs);
  std::size_t threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
  threads = std::min(threads, cfg.n_runs);
  if (threads <= 1 || options.observer) {
    for (std::size_t i = 0; i < cfg.n_runs; ++i) b.runs[i] = Simulation(cfg, run_seed(cfg, i), options).run();
  } else {
    std::vector<std::exception_ptr> errors(cfg.n_runs);
    std::size_t next = 0;
    std::mutex m;
    auto worker = [&] {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard lock(m);
          if (next >= cfg.n_runs) return;
          i = next++;
        }
        try {
          b.runs[i] = Simulation(cfg, run_seed(cfg, i), options).run();
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  aggregate_runs(cfg, b);
  return b;
}

}  // namespace dscd
