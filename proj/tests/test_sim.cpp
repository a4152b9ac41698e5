#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "greendc/sim.hpp"
#include "greendc/traces.hpp"
#include "greendc/util.hpp"

using namespace greendc;

namespace {

Scenario flat_scenario(std::size_t steps, double demand, double renewable, double price = 0.2) {
  Scenario sc;
  auto& s = sc.series;
  s.timestep_hours = 0.25;
  s.demand_kw.assign(steps, demand);
  s.solar_kw.assign(steps, renewable);
  s.wind_kw.assign(steps, 0.0);
  s.grid_price_per_kwh.assign(steps, price);
  s.storage_price_per_kwh = {0.05};
  s.grid_cap_kw.assign(steps, 10000.0);
  sc.action_levels = 5;
  return sc;
}

// Brute force over all K^T action sequences on the snapped SOC grid.
double exhaustive_minimum(const Scenario& sc, int levels, std::size_t T) {
  const int K = sc.action_levels;
  std::size_t total = 1;
  for (std::size_t t = 0; t < T; ++t) total *= static_cast<std::size_t>(K);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    double soc = snap_soc(sc.battery.initial_soc_kwh, sc.battery, levels);
    double cost = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const int a = static_cast<int>(c % static_cast<std::size_t>(K));
      c /= static_cast<std::size_t>(K);
      const auto tr = step(sc, EnvState{t, soc, false}, Action{a});
      cost += tr.outcome.energy_cost + sc.weights.sla_penalty * tr.outcome.unserved_kwh;
      soc = snap_soc(tr.next.soc_kwh, sc.battery, levels);
    }
    best = std::min(best, cost);
  }
  return best;
}

}  // namespace

TEST(Setpoint, FiveLevelsAreSymmetric) {
  BatterySpec b;
  EXPECT_DOUBLE_EQ(setpoint_kw(Action{0}, b, 5), -300.0);
  EXPECT_DOUBLE_EQ(setpoint_kw(Action{1}, b, 5), -150.0);
  EXPECT_DOUBLE_EQ(setpoint_kw(Action{2}, b, 5), 0.0);
  EXPECT_DOUBLE_EQ(setpoint_kw(Action{3}, b, 5), 150.0);
  EXPECT_DOUBLE_EQ(setpoint_kw(Action{4}, b, 5), 300.0);
  EXPECT_THROW(setpoint_kw(Action{5}, b, 5), SimError);
  EXPECT_THROW(setpoint_kw(Action{-1}, b, 5), SimError);
}

TEST(Dispatch, HandComputedDischargeStep) {
  Scenario sc = flat_scenario(4, 400.0, 100.0);
  const auto tr = step(sc, EnvState{0, 660.0, false}, max_discharge_action(5));
  const auto& o = tr.outcome;
  EXPECT_DOUBLE_EQ(o.demand_kwh, 100.0);
  EXPECT_DOUBLE_EQ(o.renewable_used_kwh, 25.0);
  EXPECT_DOUBLE_EQ(o.discharge_kwh, 75.0);
  EXPECT_DOUBLE_EQ(o.grid_kwh, 0.0);
  EXPECT_DOUBLE_EQ(o.unserved_kwh, 0.0);
  EXPECT_NEAR(tr.next.soc_kwh, 660.0 - 75.0 / 0.95, 1e-12);
  EXPECT_NEAR(o.energy_cost, 75.0 * 0.05, 1e-12);
  EXPECT_NEAR(o.reward, -(75.0 * 0.05), 1e-12);
}

TEST(Dispatch, HandComputedChargeAndCurtail) {
  Scenario sc = flat_scenario(4, 200.0, 600.0);
  const auto tr = step(sc, EnvState{0, 660.0, false}, Action{3});  // +150 kW
  const auto& o = tr.outcome;
  EXPECT_DOUBLE_EQ(o.renewable_used_kwh, 50.0);
  EXPECT_DOUBLE_EQ(o.charge_kwh, 37.5);
  EXPECT_DOUBLE_EQ(o.curtailed_kwh, 150.0 - 50.0 - 37.5);
  EXPECT_DOUBLE_EQ(o.grid_kwh, 0.0);
  EXPECT_NEAR(tr.next.soc_kwh, 660.0 + 0.95 * 37.5, 1e-12);
}

TEST(Dispatch, GridCapProducesUnserved) {
  Scenario sc = flat_scenario(2, 800.0, 0.0);
  sc.series.grid_cap_kw = {500.0, 500.0};
  const auto tr = step(sc, EnvState{0, sc.battery.soc_min_kwh, false}, idle_action(5));
  EXPECT_DOUBLE_EQ(tr.outcome.grid_kwh, 125.0);
  EXPECT_DOUBLE_EQ(tr.outcome.unserved_kwh, 75.0);
  EXPECT_TRUE(tr.outcome.sla_violated);
  EXPECT_NEAR(tr.outcome.reward, -(125.0 * 0.2 + 0.5 * 125.0 * 0.4) - 10.0 * 75.0, 1e-9);
}

TEST(Dispatch, DischargeStopsAtSocMin) {
  Scenario sc = flat_scenario(2, 800.0, 0.0);
  const double soc0 = sc.battery.soc_min_kwh + 10.0;
  const auto tr = step(sc, EnvState{0, soc0, false}, max_discharge_action(5));
  EXPECT_NEAR(tr.outcome.discharge_kwh, 0.95 * 10.0, 1e-12);
  EXPECT_NEAR(tr.next.soc_kwh, sc.battery.soc_min_kwh, 1e-12);
}

TEST(Dispatch, NoGridChargingByDefault) {
  Scenario sc = flat_scenario(2, 100.0, 0.0);
  auto tr = step(sc, EnvState{0, 660.0, false}, max_charge_action(5));
  EXPECT_DOUBLE_EQ(tr.outcome.charge_kwh, 0.0);
  EXPECT_DOUBLE_EQ(tr.next.soc_kwh, 660.0);
  sc.grid_charging = true;
  tr = step(sc, EnvState{0, 660.0, false}, max_charge_action(5));
  EXPECT_DOUBLE_EQ(tr.outcome.grid_charge_kwh, 75.0);
  EXPECT_DOUBLE_EQ(tr.outcome.grid_kwh, 25.0 + 75.0);
}

TEST(Step, RejectsFinishedEpisode) {
  Scenario sc = flat_scenario(1, 100.0, 0.0);
  auto tr = step(sc, reset(sc, 0), idle_action(5));
  EXPECT_TRUE(tr.next.done);
  EXPECT_THROW(step(sc, tr.next, idle_action(5)), SimError);
}

TEST(Scenario, ValidationRejectsBadInputs) {
  Scenario sc = flat_scenario(3, 100.0, 0.0);
  sc.series.demand_kw[1] = -1.0;
  EXPECT_THROW(sc.validate(), SimError);
  sc = flat_scenario(3, 100.0, 0.0);
  sc.series.wind_kw.pop_back();
  EXPECT_THROW(sc.validate(), SimError);
  sc = flat_scenario(3, 100.0, 0.0);
  sc.battery.initial_soc_kwh = 5000.0;
  EXPECT_THROW(sc.validate(), SimError);
}

TEST(Load, DemandModes) {
  LoadModel m;
  m.base_load_kw = 100.0;
  m.activity_load = {0.5, 2.0};
  m.cooling_overhead = {10.0, 20.0};
  EXPECT_DOUBLE_EQ(demand_at(m, 0), 110.5);
  m.mode = LoadMode::utilization;
  EXPECT_EQ(demand_series(m), (std::vector<double>{60.0, 220.0}));
  EXPECT_THROW(demand_at(m, 2), SimError);
}

// Conservation and SOC bounds over random states and actions on synthetic weeks.
TEST(DynamicsProperty, ConservationAndBounds) {
  Rng rng(42);
  for (auto preset : {Preset::high, Preset::low, Preset::mixed}) {
    Scenario sc = make_scenario(preset, 2, 5);
    const auto& b = sc.battery;
    for (int i = 0; i < 20000; ++i) {
      const std::size_t t = rng.below(sc.horizon());
      const double soc = b.soc_min_kwh + rng.uniform() * b.range_kwh();
      const Action a{static_cast<int>(rng.below(static_cast<std::size_t>(sc.action_levels)))};
      const auto tr = step(sc, EnvState{t, soc, false}, a);
      const auto& o = tr.outcome;
      ASSERT_GE(tr.next.soc_kwh, b.soc_min_kwh);
      ASSERT_LE(tr.next.soc_kwh, b.soc_max_kwh);
      const double served = o.renewable_used_kwh + o.discharge_kwh + (o.grid_kwh - o.grid_charge_kwh);
      ASSERT_NEAR(served + o.unserved_kwh, o.demand_kwh, 1e-9);
      ASSERT_NEAR(o.renewable_used_kwh + o.curtailed_kwh + (o.charge_kwh - o.grid_charge_kwh), o.renewable_kwh,
                  1e-9);
      ASSERT_NEAR(tr.next.soc_kwh, soc + b.charge_eff * o.charge_kwh - o.discharge_kwh / b.discharge_eff, 1e-9);
      ASSERT_TRUE(o.charge_kwh == 0.0 || o.discharge_kwh == 0.0);
    }
  }
}

TEST(DpOracle, MatchesExhaustiveEnumeration) {
  for (auto preset : {Preset::high, Preset::low, Preset::mixed}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      Scenario sc = make_scenario(preset, 1, seed, 1.0);
      sc.action_levels = 3;
      for (std::size_t start : {0u, 9u, 16u}) {
        // Shift the window so evening peaks and solar hours are both covered.
        Scenario w = sc;
        auto cut = [&](std::vector<double>& v) { v = std::vector<double>(v.begin() + start, v.begin() + start + 6); };
        cut(w.series.demand_kw);
        cut(w.series.solar_kw);
        cut(w.series.wind_kw);
        cut(w.series.grid_price_per_kwh);
        cut(w.series.grid_cap_kw);
        const auto plan = dp_optimal_dispatch(w, 21, 6);
        const double brute = exhaustive_minimum(w, 21, 6);
        EXPECT_NEAR(plan.objective, brute, 1e-9 * std::max(1.0, brute));
        EXPECT_EQ(plan.actions.size(), 6u);
      }
    }
  }
}

TEST(DpOracle, RandomPoliciesNeverBeatIt) {
  Scenario sc = make_scenario(Preset::mixed, 1, 3, 1.0);
  sc.action_levels = 5;
  const auto plan = dp_optimal_dispatch(sc, 21, 24);
  Rng rng(8);
  for (int i = 0; i < 300; ++i) {
    std::vector<Action> acts;
    for (int t = 0; t < 24; ++t) acts.push_back(Action{static_cast<int>(rng.below(5))});
    EXPECT_GE(replay_plan(sc, acts, 21, true).objective, plan.objective - 1e-9);
  }
}

TEST(DpOracle, RejectsLargeInstances) {
  Scenario sc = make_scenario(Preset::high, 7, 1);
  EXPECT_THROW(dp_optimal_dispatch(sc, 21, 672), SimError);
  EXPECT_THROW(dp_optimal_dispatch(sc, 1, 10), SimError);
}

TEST(EpisodeLog, JsonlRoundTrip) {
  Scenario sc = make_scenario(Preset::low, 1, 2);
  EpisodeLog log;
  log.scenario = "low";
  log.seed = 2;
  EnvState s = reset(sc, 2);
  Rng rng(1);
  while (!s.done) {
    const Action a{static_cast<int>(rng.below(11))};
    const auto tr = step(sc, s, a);
    log.steps.push_back({s, a, tr.outcome});
    s = tr.next;
  }
  const auto back = episode_from_jsonl(to_jsonl(log));
  EXPECT_EQ(back.scenario, log.scenario);
  EXPECT_EQ(back.seed, log.seed);
  EXPECT_EQ(back.steps, log.steps);
  EXPECT_TRUE(validate_constraints(back, sc).empty());
  EXPECT_THROW(episode_from_jsonl("{\"t\": 1}\n"), SimError);
}

TEST(EpisodeLog, AuditFlagsCorruption) {
  Scenario sc = flat_scenario(3, 400.0, 0.0);
  EpisodeLog log;
  EnvState s = reset(sc, 0);
  while (!s.done) {
    const auto tr = step(sc, s, max_discharge_action(5));
    log.steps.push_back({s, max_discharge_action(5), tr.outcome});
    s = tr.next;
  }
  ASSERT_TRUE(validate_constraints(log, sc).empty());
  log.steps[1].state.soc_kwh = 5000.0;
  log.steps[2].outcome.discharge_kwh = 500.0;
  const auto v = validate_constraints(log, sc);
  ASSERT_GE(v.size(), 2u);
  EXPECT_EQ(v[0].kind, "soc_bounds");
}
