#include <gtest/gtest.h>

#include <vector>

#include "dscd/sim.hpp"
#include "oracles.hpp"
#include "scenarios.hpp"

using namespace dscd;

namespace {

A2cConfig small_agent(std::uint64_t seed) {
  A2cConfig c;
  c.actor_hidden = 16;
  c.critic_hidden = 8;
  c.seed = seed;
  return c;
}

DuSnapshot random_snapshot(Rng& rng, std::size_t id) {
  DuSnapshot s;
  s.du_id = id;
  s.queued_packets = rng() % 200;
  s.queued_urllc_packets = s.queued_packets == 0 ? 0 : rng() % (s.queued_packets + 1);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    s.backlogged_ues[c] = rng() % 5;
    s.hol_ratio_sum[c] = uniform(rng, 0.0, 12.0);
  }
  s.queued_bits = rng() % 400'000;
  s.location = rng() % 2 ? Location::cu : Location::du;
  s.cu_load = uniform01(rng);
  s.interfered_fraction = uniform01(rng);
  return s;
}

struct PlacementShares {
  double cu_epochs = 0.0;  // share of tail epochs placed at the CU
  double mean_reward_du = 0.0, mean_reward_cu = 0.0;
};

PlacementShares tail_shares(const MetricsLedger& l, std::int64_t from_tti) {
  PlacementShares s;
  double n = 0, cu = 0, n_du = 0, n_cu = 0;
  for (const auto& e : l.epochs) {
    if (e.samples > 0) {
      const double r = e.reward_sum / static_cast<double>(e.samples);
      if (e.location == Location::du) s.mean_reward_du += r, ++n_du;
      else s.mean_reward_cu += r, ++n_cu;
    }
    if (e.start_tti < from_tti) continue;
    ++n;
    if (e.location == Location::cu) ++cu;
  }
  s.cu_epochs = n == 0 ? 0.0 : cu / n;
  if (n_du > 0) s.mean_reward_du /= n_du;
  if (n_cu > 0) s.mean_reward_cu /= n_cu;
  return s;
}

}  // namespace

TEST(DscdReward, Examples) {
  EXPECT_EQ(dscd_reward(true, Location::du, 1.0, 0.5, 0.5), 1.0);
  EXPECT_EQ(dscd_reward(true, Location::cu, 1.0, 0.5, 0.5), 0.5);
  EXPECT_EQ(dscd_reward(false, Location::du, 0.0, 0.5, 0.5), 0.0);
}

TEST(DscdReward, GridMatchesOracleAndStaysInBounds) {
  for (int u = 0; u <= 1; ++u)
    for (Location l : {Location::du, Location::cu})
      for (int r3 = 0; r3 <= 1; ++r3)
        for (int ti = 0; ti <= 4; ++ti)
          for (int li = 0; li <= 4; ++li) {
            const double tau = 0.25 * ti, lambda = 0.25 * li;
            const double d = l == Location::du ? 1.0 : 0.0;
            const double got = dscd_reward(u == 1, l, r3, tau, lambda);
            EXPECT_EQ(got, tau * (u * d) + lambda * r3);
            EXPECT_GE(got, 0.0);
            EXPECT_LE(got, tau + lambda);
          }
}

TEST(DscdReward, DroppedSampleScoresNoDelayTerm) {
  EXPECT_EQ((TrafficSample{true, 3.0, 10.0, false}).r3(), 1.0);
  EXPECT_EQ((TrafficSample{true, 3.0, 10.0, true}).r3(), 0.0);
  EXPECT_EQ((TrafficSample{false, 160.0, 150.0, false}).r3(), 0.0);
}

TEST(EpochAccumulator, AveragesOverSamples) {
  PlacementConfig cfg;
  EpochAccumulator acc;
  EXPECT_FALSE(acc.mean_reward().has_value());
  acc.add({true, 1.0, 10.0, false}, Location::du, cfg);   // 1.0
  acc.add({false, 1.0, 150.0, false}, Location::du, cfg); // 0.5
  acc.add({true, 0.0, 10.0, true}, Location::du, cfg);    // 0.5
  EXPECT_DOUBLE_EQ(*acc.mean_reward(), 2.0 / 3.0);
  EXPECT_EQ(acc.urllc_samples, 2u);
}

TEST(CuDelay, AddsOnlyAtTheCu) {
  PlacementConfig cfg;
  cfg.cu_extra_delay_ttis = 3;
  EXPECT_EQ(extra_delay_ttis(Location::du, cfg), 0);
  EXPECT_EQ(extra_delay_ttis(Location::cu, cfg), 3);
}

TEST(CuDelay, ZeroDelayMakesPlacementsAccountIdentically) {
  PlacementConfig cfg;
  cfg.cu_extra_delay_ttis = 0;
  RlcQueue a(standard_flow(TrafficClass::ar, 256e3, 1000), 1.0), b = a;
  for (std::int64_t t = 0; t < 20; t += 3) a.push({1000, t, 80, 1000}), b.push({1000, t, 80, 1000});
  for (std::int64_t now = 0; now < 40; ++now) {
    EXPECT_EQ(a.hol_delay_ms(now, extra_delay_ttis(Location::du, cfg)),
              b.hol_delay_ms(now, extra_delay_ttis(Location::cu, cfg)));
    EXPECT_EQ(a.drop_expired(now, extra_delay_ttis(Location::du, cfg)).size(),
              b.drop_expired(now, extra_delay_ttis(Location::cu, cfg)).size());
  }
}

TEST(CuDelay, MoreDelayNeverDeliversMore) {
  Rng rng = make_stream(21, "cu-delay-property");
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<Packet>> arrivals(400);
    std::vector<std::uint64_t> service(400);
    const auto flow = standard_flow(kAllClasses[trial % 3], 256e3, 1000);
    for (std::int64_t t = 0; t < 400; ++t) {
      arrivals[t] = generate_arrivals(flow, t, 1.0, rng, 3.0);
      service[t] = rng() % 2500;
    }
    std::uint64_t previous = UINT64_MAX;
    for (std::int64_t extra = 0; extra <= 30; extra += 3) {
      RlcQueue q(flow, 1.0);
      std::uint64_t delivered = 0;
      for (std::int64_t t = 0; t < 400; ++t) {
        for (const auto& p : arrivals[t]) q.push(p);
        q.drop_expired(t, extra);
        delivered += q.serve(service[t], t, extra).delivered.size();
      }
      EXPECT_LE(delivered, previous) << "extra " << extra;
      previous = delivered;
    }
  }
}

TEST(PlacementObservation, FixedLengthFeaturesInUnitInterval) {
  Rng rng = make_stream(5, "placement-obs");
  PlacementConfig cfg;
  for (int trial = 0; trial < 500; ++trial) {
    const auto obs = build_placement_observation(random_snapshot(rng, 0), cfg);
    ASSERT_EQ(obs.size(), kPlacementFeatures);
    for (double f : obs.features) {
      ASSERT_GE(f, 0.0);
      ASSERT_LE(f, 1.0);
    }
  }
  EXPECT_EQ(build_placement_observation(DuSnapshot{}, cfg).features, std::vector<double>(kPlacementFeatures, 0.0));
}

TEST(PlacementController, OneLocationPerDuAndDelayedTransitions) {
  PlacementConfig cfg;
  PlacementController ctl(small_agent(3), cfg, 3);
  Rng rng = make_stream(3, "placement-sampling"), gen = make_stream(3, "snap");
  std::vector<DuSnapshot> snaps{random_snapshot(gen, 0), random_snapshot(gen, 1), random_snapshot(gen, 2)};
  auto first = ctl.placement_epoch(snaps, {0.4, 0.2, std::nullopt}, rng);
  EXPECT_EQ(first.locations.size(), 3u);
  EXPECT_TRUE(first.transitions.empty());
  auto second = ctl.placement_epoch(snaps, {0.4, std::nullopt, 1.0}, rng);
  ASSERT_EQ(second.transitions.size(), 2u);
  EXPECT_EQ(second.transitions[0].action_index, static_cast<std::size_t>(first.locations[0]));
  EXPECT_EQ(second.transitions[1].reward, 1.0);
  EXPECT_TRUE(second.transitions[0].terminal);
  EXPECT_THROW(ctl.placement_epoch(snaps, {0.1}, rng), ConfigError);
}

TEST(PlacementController, PinOverridesEveryDu) {
  PlacementController ctl(small_agent(1), PlacementConfig{}, 4);
  Rng rng = make_stream(1, "placement-sampling");
  for (int k = 0; k < 20; ++k) {
    const auto step = ctl.placement_epoch(std::vector<DuSnapshot>(4), std::vector<std::optional<double>>(4, 0.5),
                                          rng, Location::cu);
    for (auto l : step.locations) EXPECT_EQ(l, Location::cu);
  }
}

TEST(PlacementController, TrainingDisabledIsReproducibleAndFrozen) {
  PlacementConfig cfg;
  cfg.training = false;
  PlacementController a(small_agent(8), cfg, 2), b(small_agent(8), cfg, 2);
  const auto before = a.agent().actor().flat_parameters();
  Rng ra = make_stream(8, "placement-sampling"), rb = make_stream(8, "placement-sampling");
  Rng gen = make_stream(8, "snap");
  for (int k = 0; k < 50; ++k) {
    std::vector<DuSnapshot> snaps{random_snapshot(gen, 0), random_snapshot(gen, 1)};
    const auto sa = a.placement_epoch(snaps, {0.3, 0.9}, ra);
    const auto sb = b.placement_epoch(snaps, {0.3, 0.9}, rb);
    EXPECT_EQ(sa.locations, sb.locations);
  }
  EXPECT_EQ(a.agent().actor().flat_parameters(), before);
}

TEST(Coordination, CuPlacementReducesInterferedRbgs) {
  auto cfg = scenario::tiny_config(Mode::nf_du, 100);
  cfg.n_ues = 20;
  const auto du = Simulation(cfg, 5).run();
  cfg.mode = Mode::nf_cu;
  const auto cu = Simulation(cfg, 5).run();
  ASSERT_EQ(du.windows.size(), 1u);
  EXPECT_GT(du.windows[0].interfered_rbgs, 0u);
  EXPECT_LT(cu.windows[0].interfered_rbgs, du.windows[0].interfered_rbgs);
}

TEST(Coordination, WithoutCoordinationCuOnlyAddsDelay) {
  auto cfg = scenario::tiny_config(Mode::nf_cu, 100);
  cfg.n_ues = 20;
  cfg.placement.coordination = false;
  const auto l = Simulation(cfg, 5).run();
  EXPECT_GT(l.windows[0].interfered_rbgs, 0u);
}

TEST(DscdLearning, PureUrllcSettlesAtTheDu) {
  auto cfg = scenario::desk_config(Mode::dscd);
  cfg.override_envelope = true;
  cfg.urllc_density = 1.0;
  const auto l = Simulation(cfg, 1).run();
  const auto s = tail_shares(l, cfg.total_ttis / 2);
  EXPECT_GT(1.0 - s.cu_epochs, 0.8);
}

// Pure video under heavy collisions: coordination at the CU is the only way to
// raise R3. Placement epochs span the video budget so a decision's effect on
// drops lands in its own epoch.
TEST(DscdLearning, PureVideoWithHeavyCollisionsLeansToTheCu) {
  auto cfg = scenario::desk_config(Mode::dscd);
  cfg.override_envelope = true;
  cfg.urllc_density = 0.0;
  cfg.channel.interference_penalty = 6;
  cfg.placement.epoch_length = 200;
  cfg.total_ttis = 20000;
  cfg.actor_hidden = 64;
  cfg.critic_hidden = 32;
  const auto l = Simulation(cfg, 1).run();
  const auto s = tail_shares(l, cfg.total_ttis / 2);
  EXPECT_GT(s.mean_reward_cu, s.mean_reward_du);
  EXPECT_GT(s.cu_epochs, 0.5);
}
