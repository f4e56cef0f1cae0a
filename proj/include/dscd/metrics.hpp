#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "placement.hpp"
#include "traffic.hpp"

namespace dscd {

struct ClassWindowStats {
  std::uint64_t arrivals = 0;
  std::uint64_t arrival_bits = 0;
  std::uint64_t delivered = 0;
  std::uint64_t delivered_bits = 0;
  std::uint64_t dropped = 0;
  std::uint64_t dropped_bits = 0;
  double hol_sum_ms = 0.0;
  // Packets (delivered or dropped) handled while the serving scheduler ran at each location.
  std::uint64_t du_samples = 0;
  std::uint64_t cu_samples = 0;

  void merge(const ClassWindowStats& o) {
    arrivals += o.arrivals;
    arrival_bits += o.arrival_bits;
    delivered += o.delivered;
    delivered_bits += o.delivered_bits;
    dropped += o.dropped;
    dropped_bits += o.dropped_bits;
    hol_sum_ms += o.hol_sum_ms;
    du_samples += o.du_samples;
    cu_samples += o.cu_samples;
  }
  bool operator==(const ClassWindowStats&) const = default;
};

struct WindowStats {
  std::int64_t start_tti = 0;
  std::int64_t ttis = 0;
  std::array<ClassWindowStats, kNumClasses> classes{};
  std::uint64_t assigned_rbgs = 0;
  std::uint64_t interfered_rbgs = 0;

  bool operator==(const WindowStats&) const = default;
};

struct EpochRecord {
  std::int64_t start_tti = 0;
  std::size_t du = 0;
  Location location = Location::du;
  std::uint64_t samples = 0;
  std::uint64_t urllc_samples = 0;
  double reward_sum = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct MetricsLedger {
  std::int64_t window_ttis = 100;
  double tti_ms = 1.0;
  std::vector<WindowStats> windows;
  std::vector<EpochRecord> epochs;

  bool operator==(const MetricsLedger&) const = default;

  WindowStats& window_for(std::int64_t tti) {
    const auto idx = static_cast<std::size_t>(tti / window_ttis);
    while (windows.size() <= idx) {
      WindowStats w;
      w.start_tti = static_cast<std::int64_t>(windows.size()) * window_ttis;
      windows.push_back(w);
    }
    return windows[idx];
  }
};

// Half-open range of window indices.
struct WindowRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  static WindowRange single(std::size_t w) { return {w, w + 1}; }
  static WindowRange all(const MetricsLedger& l) { return {0, l.windows.size()}; }
  // The trailing fraction of windows (at least one when any exist).
  static WindowRange tail(const MetricsLedger& l, double fraction) {
    const std::size_t n = l.windows.size();
    auto keep = static_cast<std::size_t>(static_cast<double>(n) * fraction + 0.5);
    keep = std::clamp<std::size_t>(keep, n == 0 ? 0 : 1, n);
    return {n - keep, n};
  }
};

inline ClassWindowStats pooled(const MetricsLedger& l, TrafficClass c, WindowRange range) {
  ClassWindowStats s;
  for (std::size_t w = range.begin; w < range.end && w < l.windows.size(); ++w)
    s.merge(l.windows[w].classes[index_of(c)]);
  return s;
}

inline std::int64_t ttis_in(const MetricsLedger& l, WindowRange range) {
  std::int64_t t = 0;
  for (std::size_t w = range.begin; w < range.end && w < l.windows.size(); ++w) t += l.windows[w].ttis;
  return t;
}

// delivered / (delivered + dropped); absent when nothing was resolved.
inline std::optional<double> pdr(const MetricsLedger& l, TrafficClass c, WindowRange range) {
  const auto s = pooled(l, c, range);
  const auto resolved = s.delivered + s.dropped;
  if (resolved == 0) return std::nullopt;
  return static_cast<double>(s.delivered) / static_cast<double>(resolved);
}

// Mean HoL age at delivery; absent when nothing was delivered.
inline std::optional<double> mean_hol(const MetricsLedger& l, TrafficClass c, WindowRange range) {
  const auto s = pooled(l, c, range);
  if (s.delivered == 0) return std::nullopt;
  return s.hol_sum_ms / static_cast<double>(s.delivered);
}

// Delivered class throughput in kbit/s; absent for an empty range.
inline std::optional<double> throughput_kbps(const MetricsLedger& l, TrafficClass c, WindowRange range) {
  const auto t = ttis_in(l, range);
  if (t == 0) return std::nullopt;
  const auto s = pooled(l, c, range);
  return static_cast<double>(s.delivered_bits) / (static_cast<double>(t) * l.tti_ms);
}

struct LocationRatio {
  double du = 0.0;
  double cu = 0.0;
};

// Share of a class's handled packets scheduled at DU vs CU; absent without traffic.
inline std::optional<LocationRatio> relocation_ratio(const MetricsLedger& l, TrafficClass c, WindowRange range) {
  const auto s = pooled(l, c, range);
  const auto total = s.du_samples + s.cu_samples;
  if (total == 0) return std::nullopt;
  const double du = static_cast<double>(s.du_samples) / static_cast<double>(total);
  return LocationRatio{du, 1.0 - du};
}

// Share of placement epochs at each location among epochs whose traffic was
// mostly URLLC (more than half of the epoch's samples).
inline std::optional<LocationRatio> urllc_epoch_ratio(const MetricsLedger& l, std::int64_t from_tti = 0) {
  std::uint64_t du = 0, total = 0;
  for (const auto& e : l.epochs) {
    if (e.start_tti < from_tti || e.samples == 0 || 2 * e.urllc_samples <= e.samples) continue;
    ++total;
    if (e.location == Location::du) ++du;
  }
  if (total == 0) return std::nullopt;
  const double r = static_cast<double>(du) / static_cast<double>(total);
  return LocationRatio{r, 1.0 - r};
}

}  // namespace dscd
