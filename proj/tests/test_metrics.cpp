#include <gtest/gtest.h>

#include <cmath>

#include "brute_force.hpp"
#include "greendc/metrics.hpp"
#include "greendc/traces.hpp"
#include "greendc/util.hpp"

using namespace greendc;

namespace {

LogEntry entry(double demand, double used, double grid, double price, double discharge, double unserved) {
  LogEntry e;
  auto& o = e.outcome;
  o.demand_kwh = demand;
  o.renewable_used_kwh = used;
  o.grid_kwh = grid;
  o.grid_price_per_kwh = price;
  o.discharge_kwh = discharge;
  o.storage_price_per_kwh = 0.5;
  o.unserved_kwh = unserved;
  o.emission_factor_kg_per_kwh = 0.4;
  o.reward = -(grid * price);
  return e;
}

EpisodeLog random_episode(Rng& rng, std::uint64_t seed) {
  const Preset presets[] = {Preset::high, Preset::low, Preset::mixed};
  Scenario sc = make_scenario(presets[rng.below(3)], 1, seed);
  // Tight caps on some runs so unserved energy shows up.
  if (rng.uniform() < 0.5)
    for (auto& c : sc.series.grid_cap_kw) c *= 0.3 + 0.5 * rng.uniform();
  EpisodeLog log;
  log.scenario = sc.label;
  log.seed = seed;
  EnvState s = reset(sc, seed);
  while (!s.done) {
    const Action a{static_cast<int>(rng.below(static_cast<std::uint64_t>(sc.action_levels)))};
    const auto tr = step(sc, s, a);
    log.steps.push_back({s, a, tr.outcome});
    s = tr.next;
  }
  return log;
}

}  // namespace

TEST(Metrics, HandComputedValues) {
  EpisodeLog log;
  log.steps = {entry(10, 6, 4, 0.1, 0, 0), entry(10, 2, 3, 0.2, 4, 1), entry(8, 8, 0, 0.7, 0, 0)};
  EXPECT_DOUBLE_EQ(energy_cost(log), 0.4 + 0.6 + 2.0);
  const auto sla = sla_violations(log);
  EXPECT_EQ(sla.count, 1u);
  EXPECT_DOUBLE_EQ(sla.rate, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(energy_efficiency(log), 16.0 / 27.0);
  EXPECT_DOUBLE_EQ(carbon_emissions(log), 7 * 0.4);
  EXPECT_DOUBLE_EQ(cumulative_reward(log), -(0.4 + 0.6));
  const auto r = evaluate(log, {0.5, 0.5});
  EXPECT_EQ(r.steps, 3u);
  EXPECT_EQ(r.success_rate, 1.0);
  EXPECT_EQ(evaluate(log, {0.9, 0.5}).success_rate, 0.0);
}

TEST(Metrics, EmptyAndUnservedEdgeCases) {
  EpisodeLog empty;
  EXPECT_EQ(energy_cost(empty), 0.0);
  EXPECT_EQ(sla_violations(empty).rate, 0.0);
  EXPECT_THROW(energy_efficiency(empty), MetricError);
  EpisodeLog dark;
  dark.steps = {entry(5, 0, 0, 0.1, 0, 5)};
  EXPECT_THROW(evaluate(dark), MetricError);
}

TEST(Metrics, SuccessRate) {
  MetricReport good, bad;
  good.energy_efficiency = 0.9;
  bad.energy_efficiency = 0.9;
  bad.sla_rate = 0.5;
  const std::vector<MetricReport> reports{good, bad, good, good};
  EXPECT_DOUBLE_EQ(success_rate(reports), 0.75);
  EXPECT_THROW(success_rate(std::span<const MetricReport>{}), MetricError);
  EXPECT_THROW(success_rate(reports, {1.5, 0.1}), MetricError);
}

TEST(Metrics, MatchBruteForceOverRawJsonl) {
  Rng rng(17);
  for (int i = 0; i < 25; ++i) {
    const auto log = random_episode(rng, 100 + i);
    const auto text = to_jsonl(log);
    const auto r = evaluate(episode_from_jsonl(text));
    const auto b = brute_force_metrics(text);
    EXPECT_NEAR(r.energy_cost, b.energy_cost, 1e-9);
    EXPECT_NEAR(static_cast<double>(r.sla_violations), b.sla_count, 1e-9);
    EXPECT_NEAR(r.sla_rate, b.sla_rate, 1e-9);
    EXPECT_NEAR(r.energy_efficiency, b.efficiency, 1e-9);
    EXPECT_NEAR(r.cumulative_reward, b.reward, 1e-9);
    EXPECT_NEAR(r.carbon_emissions_kg, b.emissions, 1e-9);
  }
}

TEST(Metrics, CsvRowRoundTrip) {
  Rng rng(3);
  const auto r = evaluate(random_episode(rng, 5));
  EXPECT_EQ(metric_report_from_csv(to_csv_row(r)), r);
  EXPECT_THROW(metric_report_from_csv("1,2,3"), MetricError);
  EXPECT_THROW(metric_report_from_csv("1,x,3,4,5,6,7,8"), MetricError);
}
