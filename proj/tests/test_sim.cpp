#include <gtest/gtest.h>

#include "dscd/sim.hpp"
#include "scenarios.hpp"

using namespace dscd;

TEST(Simulation, ZeroTtisGivesEmptyLedger) {
  auto cfg = scenario::tiny_config(Mode::dscd, 0);
  const auto l = Simulation(cfg, 1).run();
  EXPECT_TRUE(l.windows.empty());
  EXPECT_TRUE(l.epochs.empty());
}

TEST(Simulation, SameSeedSameLedger) {
  for (Mode m : {Mode::dscd, Mode::nf_du, Mode::nf_cu}) {
    const auto cfg = scenario::tiny_config(m);
    EXPECT_EQ(Simulation(cfg, 4).run(), Simulation(cfg, 4).run()) << mode_name(m);
  }
  const auto cfg = scenario::tiny_config(Mode::dscd);
  EXPECT_NE(Simulation(cfg, 4).run(), Simulation(cfg, 5).run());
}

TEST(Simulation, InvariantsHoldEveryTti) {
  for (Mode m : {Mode::dscd, Mode::nf_du, Mode::nf_cu})
    for (Scenario s : {Scenario::fixed, Scenario::mobile}) {
      auto cfg = scenario::tiny_config(m, 400);
      cfg.scenario = s;
      scenario::InvariantAuditor audit(cfg.placement.epoch_length);
      RunOptions opt;
      opt.observer = std::ref(audit);
      EXPECT_NO_THROW(Simulation(cfg, 2, opt).run());
      EXPECT_EQ(audit.ttis_checked(), 400);
    }
}

TEST(Simulation, WindowsPartitionTheRun) {
  const auto cfg = scenario::tiny_config(Mode::nf_du, 250);
  const auto l = Simulation(cfg, 3).run();
  ASSERT_EQ(l.windows.size(), 3u);
  EXPECT_EQ(l.windows[2].ttis, 50);
  std::uint64_t delivered = 0, dropped = 0, arrived = 0;
  for (const auto& w : l.windows)
    for (const auto& c : w.classes) delivered += c.delivered, dropped += c.dropped, arrived += c.arrivals;
  EXPECT_LE(delivered + dropped, arrived);
  EXPECT_EQ(l.epochs.size(), 25u * cfg.n_cells);
}

TEST(Simulation, MobileScenarioCarriesV2x) {
  auto cfg = scenario::tiny_config(Mode::nf_du, 500);
  cfg.scenario = Scenario::mobile;
  const auto l = Simulation(cfg, 1).run();
  EXPECT_GT(pooled(l, TrafficClass::v2x, WindowRange::all(l)).arrivals, 0u);
  cfg.scenario = Scenario::fixed;
  const auto f = Simulation(cfg, 1).run();
  EXPECT_EQ(pooled(f, TrafficClass::v2x, WindowRange::all(f)).arrivals, 0u);
}

TEST(BaselineEquivalence, PinnedDscdMatchesForcedBaselines) {
  for (const auto& [baseline, pin] : {std::pair{Mode::nf_du, Location::du}, std::pair{Mode::nf_cu, Location::cu}}) {
    const auto base_cfg = scenario::tiny_config(baseline, 500);
    auto dscd_cfg = base_cfg;
    dscd_cfg.mode = Mode::dscd;
    RunOptions pinned;
    pinned.pin_placement = pin;
    EXPECT_EQ(Simulation(base_cfg, 9).run(), Simulation(dscd_cfg, 9, pinned).run()) << location_name(pin);
  }
}

TEST(BaselineEquivalence, ForcedBaselinesFixTheRelocationRatio) {
  const auto du = Simulation(scenario::tiny_config(Mode::nf_du), 1).run();
  const auto cu = Simulation(scenario::tiny_config(Mode::nf_cu), 1).run();
  for (std::size_t w = 0; w < du.windows.size(); ++w)
    for (auto c : {TrafficClass::video, TrafficClass::ar}) {
      if (auto r = relocation_ratio(du, c, WindowRange::single(w))) EXPECT_EQ(r->du, 1.0);
      if (auto r = relocation_ratio(cu, c, WindowRange::single(w))) EXPECT_EQ(r->cu, 1.0);
    }
}

TEST(Batch, RunsUseDerivedSeedsAndAreThreadIndependent) {
  auto cfg = scenario::tiny_config(Mode::dscd, 200);
  cfg.n_runs = 3;
  cfg.threads = 1;
  const auto serial = run(cfg);
  cfg.threads = 3;
  const auto parallel = run(cfg);
  ASSERT_EQ(serial.runs.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(serial.runs[i], parallel.runs[i]);
    EXPECT_EQ(serial.runs[i], Simulation(cfg, cfg.seed + i).run());
  }
  ASSERT_EQ(serial.aggregate.size(), parallel.aggregate.size());
  for (std::size_t k = 0; k < serial.aggregate.size(); ++k) {
    EXPECT_EQ(serial.aggregate[k].pdr, parallel.aggregate[k].pdr);
    EXPECT_EQ(serial.aggregate[k].mean_hol_ms, parallel.aggregate[k].mean_hol_ms);
  }
}

TEST(Batch, AggregateIsPerWindowMeanAcrossRuns) {
  auto cfg = scenario::tiny_config(Mode::nf_du, 200);
  cfg.n_runs = 2;
  const auto b = run(cfg);
  const auto classes = active_classes(cfg);
  ASSERT_EQ(b.aggregate.size(), 2 * classes.size());
  for (std::size_t w = 0; w < 2; ++w)
    for (std::size_t k = 0; k < classes.size(); ++k) {
      const auto& row = b.aggregate[w * classes.size() + k];
      EXPECT_EQ(row.traffic, classes[k]);
      const auto a = throughput_kbps(b.runs[0], classes[k], WindowRange::single(w));
      const auto c = throughput_kbps(b.runs[1], classes[k], WindowRange::single(w));
      EXPECT_DOUBLE_EQ(*row.throughput_kbps, (*a + *c) / 2.0);
    }
  ASSERT_EQ(b.summary.size(), classes.size());
}

TEST(Batch, InvalidConfigRejectedBeforeRunning) {
  auto cfg = scenario::tiny_config(Mode::dscd);
  cfg.urllc_density = 0.9;
  EXPECT_THROW(run(cfg), ConfigError);
  EXPECT_THROW(Simulation(cfg, 1), ConfigError);
  cfg = scenario::tiny_config(Mode::dscd);
  cfg.n_rbg = 0;
  EXPECT_THROW(run(cfg), ConfigError);
}
