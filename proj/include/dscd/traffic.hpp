#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace dscd {

enum class TrafficClass : std::size_t { video = 0, ar = 1, v2x = 2 };
inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<TrafficClass, kNumClasses> kAllClasses{TrafficClass::video, TrafficClass::ar,
                                                                   TrafficClass::v2x};

inline std::string_view class_name(TrafficClass c) {
  switch (c) {
    case TrafficClass::video: return "video";
    case TrafficClass::ar: return "ar";
    case TrafficClass::v2x: return "v2x";
  }
  return "video";
}

inline TrafficClass class_from_name(std::string_view name) {
  for (auto c : kAllClasses)
    if (class_name(c) == name) return c;
  throw ConfigError("unknown traffic class '" + std::string(name) + "'");
}

inline std::size_t index_of(TrafficClass c) { return static_cast<std::size_t>(c); }

enum class ResourceType { gbr, non_gbr };

struct FlowSpec {
  TrafficClass traffic = TrafficClass::video;
  int qci = 2;
  ResourceType resource_type = ResourceType::gbr;
  int priority = 40;  // lower is more important
  double delay_budget_ms = 150.0;
  double mean_rate_bps = 256'000.0;
  double packet_size_bits = 1000.0;
  bool is_urllc = false;
};

// Delay-critical classes are those with a budget of at most 20 ms.
inline constexpr double kUrllcBudgetThresholdMs = 20.0;

// QoS rows per class: QCI, resource type, priority, delay budget.
inline FlowSpec standard_flow(TrafficClass c, double mean_rate_bps, double packet_size_bits) {
  FlowSpec f;
  f.traffic = c;
  f.mean_rate_bps = mean_rate_bps;
  f.packet_size_bits = packet_size_bits;
  switch (c) {
    case TrafficClass::video:
      f.qci = 2, f.resource_type = ResourceType::gbr, f.priority = 40, f.delay_budget_ms = 150.0;
      break;
    case TrafficClass::ar:
      f.qci = 80, f.resource_type = ResourceType::non_gbr, f.priority = 68, f.delay_budget_ms = 10.0;
      break;
    case TrafficClass::v2x:
      f.qci = 75, f.resource_type = ResourceType::gbr, f.priority = 25, f.delay_budget_ms = 20.0;
      break;
  }
  f.is_urllc = f.delay_budget_ms <= kUrllcBudgetThresholdMs;
  return f;
}

inline bool is_urllc_qci(int qci) {
  for (auto c : kAllClasses) {
    const FlowSpec f = standard_flow(c, 0.0, 1.0);
    if (f.qci == qci) return f.is_urllc;
  }
  throw ConfigError("unknown QCI " + std::to_string(qci));
}

struct Packet {
  std::uint64_t size_bits = 0;
  std::int64_t arrival_tti = 0;
  int qci = 0;
  std::uint64_t remaining_bits = 0;
};

// Poisson arrivals whose long-run bit rate equals flow.mean_rate_bps * rate_scale.
inline std::vector<Packet> generate_arrivals(const FlowSpec& flow, std::int64_t tti, double tti_ms, Rng& rng,
                                             double rate_scale = 1.0) {
  std::vector<Packet> out;
  const double mean_packets = flow.mean_rate_bps * rate_scale * (tti_ms / 1000.0) / flow.packet_size_bits;
  if (!(mean_packets > 0.0)) return out;
  std::poisson_distribution<int> count(mean_packets);
  const int n = count(rng);
  const auto size = static_cast<std::uint64_t>(flow.packet_size_bits);
  for (int i = 0; i < n; ++i) out.push_back(Packet{size, tti, flow.qci, size});
  return out;
}

struct DeliveredPacket {
  Packet packet;
  double hol_ms = 0.0;  // effective age when its last bit was served
};

struct ServeResult {
  std::vector<DeliveredPacket> delivered;
  std::vector<Packet> expired;  // completed after their budget; count as dropped
  std::uint64_t bits_consumed = 0;
};

// Per-UE RLC buffer. Ages are measured in TTIs; extra_ttis adds processing
// latency (e.g. a remotely placed scheduler) to every packet's effective age.
class RlcQueue {
 public:
  RlcQueue() = default;
  RlcQueue(FlowSpec flow, double tti_ms) : flow_(flow), tti_ms_(tti_ms) {}

  const FlowSpec& flow() const { return flow_; }
  bool empty() const { return packets_.empty(); }
  std::size_t size() const { return packets_.size(); }
  const std::deque<Packet>& packets() const { return packets_; }
  const Packet& head() const { return packets_.front(); }

  void push(const Packet& p) {
    if (!packets_.empty() && p.arrival_tti < packets_.back().arrival_tti)
      throw InvariantViolation("RLC queue must stay ordered by arrival");
    packets_.push_back(p);
  }

  std::uint64_t backlog_bits() const {
    std::uint64_t s = 0;
    for (const auto& p : packets_) s += p.remaining_bits;
    return s;
  }

  std::uint64_t queued_size_bits() const {
    std::uint64_t s = 0;
    for (const auto& p : packets_) s += p.size_bits;
    return s;
  }

  double age_ms(const Packet& p, std::int64_t now, std::int64_t extra_ttis = 0) const {
    return static_cast<double>(now - p.arrival_tti + extra_ttis) * tti_ms_;
  }

  double hol_delay_ms(std::int64_t now, std::int64_t extra_ttis = 0) const {
    return packets_.empty() ? 0.0 : age_ms(packets_.front(), now, extra_ttis);
  }

  // Removes every packet whose effective age exceeds the delay budget.
  std::vector<Packet> drop_expired(std::int64_t now, std::int64_t extra_ttis = 0) {
    std::vector<Packet> dropped;
    std::deque<Packet> kept;
    for (const auto& p : packets_) {
      if (age_ms(p, now, extra_ttis) > flow_.delay_budget_ms)
        dropped.push_back(p);
      else
        kept.push_back(p);
    }
    if (!dropped.empty()) packets_.swap(kept);
    return dropped;
  }

  // Drains up to budget_bits from the head in FIFO order.
  ServeResult serve(std::uint64_t budget_bits, std::int64_t now, std::int64_t extra_ttis = 0) {
    ServeResult r;
    while (budget_bits > 0 && !packets_.empty()) {
      Packet& head = packets_.front();
      const std::uint64_t take = std::min(budget_bits, head.remaining_bits);
      head.remaining_bits -= take;
      budget_bits -= take;
      r.bits_consumed += take;
      if (head.remaining_bits > 0) break;
      const double age = age_ms(head, now, extra_ttis);
      if (age > flow_.delay_budget_ms)
        r.expired.push_back(head);
      else
        r.delivered.push_back({head, age});
      packets_.pop_front();
    }
    return r;
  }

 private:
  FlowSpec flow_;
  double tti_ms_ = 1.0;
  std::deque<Packet> packets_;
};

}  // namespace dscd
