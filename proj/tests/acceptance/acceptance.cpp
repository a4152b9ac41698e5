// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: greendc_acceptance [criterion numbers...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../brute_force.hpp"
#include "greendc/agents.hpp"
#include "greendc/harness.hpp"
#include "greendc/metrics.hpp"
#include "greendc/nn.hpp"
#include "greendc/sim.hpp"
#include "greendc/traces.hpp"
#include "greendc/util.hpp"

using namespace greendc;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Shared between criteria 1-3: the full desk protocol is trained once.
struct Protocol {
  ExperimentRunner runner{ExperimentPlan{}};
  std::optional<ComparisonTable> comparison;
  std::optional<AblationTable> ablation;
  double comparison_seconds = 0.0;
  double ablation_seconds = 0.0;

  const ComparisonTable& cmp() {
    if (!comparison) {
      const auto t0 = Clock::now();
      comparison = runner.comparison();
      comparison_seconds = seconds_since(t0);
      std::printf("  comparison protocol finished in %.0f s\n", comparison_seconds);
      std::fflush(stdout);
    }
    return *comparison;
  }
  const AblationTable& abl() {
    cmp();
    if (!ablation) {
      const auto t0 = Clock::now();
      ablation = runner.ablation();
      ablation_seconds = seconds_since(t0);
      std::printf("  ablation protocol finished in %.0f s (full system reused)\n", ablation_seconds);
      std::fflush(stdout);
    }
    return *ablation;
  }
};

const MetricReport& cell_report(const ComparisonTable& t, const std::string& agent, const std::string& scenario,
                                std::uint64_t seed) {
  for (const auto& c : t.cells)
    if (c.agent == agent && c.scenario == scenario && c.seed == seed) return c.report;
  throw std::runtime_error("missing cell " + agent + "/" + scenario);
}

Verdict cost_reduction(Protocol& p) {
  const auto& t = p.cmp();
  const auto& plan = p.runner.plan();
  bool ok = p.comparison_seconds <= 3600.0;
  std::string detail;
  for (auto preset : plan.scenarios) {
    const std::string sc = preset_name(preset);
    int seeds_ok = 0;
    for (auto seed : plan.seeds) {
      const double base = cell_report(t, "rule_based", sc, seed).energy_cost;
      const double ppo = cell_report(t, "ppo", sc, seed).energy_cost;
      if (ppo <= 0.85 * base) ++seeds_ok;
    }
    const double mean_red = t.row("ppo", sc).cost_improvement_pct;
    const bool pass = mean_red >= 15.0 && seeds_ok >= 4;
    ok = ok && pass;
    detail += sc + " " + fmt("%.1f%%", mean_red) + " (" + std::to_string(seeds_ok) + "/" +
              std::to_string(plan.seeds.size()) + " seeds); ";
  }
  detail += fmt("runtime %.0f s", p.comparison_seconds);
  return {ok, detail};
}

Verdict baseline_ordering(Protocol& p) {
  const auto& t = p.cmp();
  int holds = 0;
  std::string detail;
  for (auto preset : p.runner.plan().scenarios) {
    const std::string sc = preset_name(preset);
    const auto& ppo = t.row("ppo", sc).metrics;
    const auto& q = t.row("tabular_q", sc).metrics;
    const auto& rule = t.row("rule_based", sc).metrics;
    const bool reward = ppo.mean[3] >= q.mean[3] && q.mean[3] >= rule.mean[3];
    bool sla = true;
    for (const auto& r : t.rows)
      if (r.scenario == sc && r.agent != "ppo" && ppo.mean[1] > r.metrics.mean[1]) sla = false;
    if (reward && sla) ++holds;
    detail += sc + " R " + fmt("%.0f", ppo.mean[3]) + "/" + fmt("%.0f", q.mean[3]) + "/" + fmt("%.0f", rule.mean[3]) +
              " sla " + fmt("%.4f", ppo.mean[1]) + (reward && sla ? " ok; " : " no; ");
  }
  detail += std::to_string(holds) + "/3 scenarios";
  return {holds >= 2, detail};
}

Verdict ablation_direction(Protocol& p) {
  const auto& t = p.abl();
  int cells = 0, holds = 0;
  std::string detail;
  for (auto preset : p.runner.plan().scenarios) {
    const std::string sc = preset_name(preset);
    const auto& full = t.row("full", sc).metrics;
    for (const auto& flags : p.runner.plan().ablations) {
      const auto& v = t.row(ablation_label(flags), sc).metrics;
      ++cells;
      const bool ok = full.mean[0] <= v.mean[0] && full.mean[3] >= v.mean[3];
      if (ok) ++holds;
      else detail += sc + "/" + ablation_label(flags) + " " + fmt("%+.1f%% cost; ", 100.0 * (v.mean[0] - full.mean[0]) / full.mean[0]);
    }
  }
  detail += std::to_string(holds) + "/" + std::to_string(cells) + " cells" + fmt(", runtime %.0f s", p.ablation_seconds);
  return {holds >= 8, detail};
}

double exhaustive_minimum(const Scenario& sc, int levels, std::size_t T) {
  const auto K = static_cast<std::size_t>(sc.action_levels);
  std::size_t total = 1;
  for (std::size_t t = 0; t < T; ++t) total *= K;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    double soc = snap_soc(sc.battery.initial_soc_kwh, sc.battery, levels);
    double cost = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const Action a{static_cast<int>(c % K)};
      c /= K;
      const auto tr = step(sc, EnvState{t, soc, false}, a);
      cost += tr.outcome.energy_cost + sc.weights.sla_penalty * tr.outcome.unserved_kwh;
      soc = snap_soc(tr.next.soc_kwh, sc.battery, levels);
    }
    best = std::min(best, cost);
  }
  return best;
}

Scenario window(const Scenario& sc, std::size_t start, std::size_t len) {
  Scenario w = sc;
  auto cut = [&](std::vector<double>& v) { v = std::vector<double>(v.begin() + start, v.begin() + start + len); };
  cut(w.series.demand_kw);
  cut(w.series.solar_kw);
  cut(w.series.wind_kw);
  cut(w.series.grid_price_per_kwh);
  cut(w.series.grid_cap_kw);
  return w;
}

Verdict optimality_gap(Protocol&) {
  bool ok = true;
  std::string detail;
  // DP against brute force over 3^6 plans on several windows.
  double worst = 0.0;
  for (auto preset : {Preset::high, Preset::low, Preset::mixed})
    for (std::size_t start : {0u, 6u, 12u, 18u}) {
      Scenario sc = window(make_scenario(preset, 1, 11, 1.0), start, 6);
      sc.action_levels = 3;
      const double dp = dp_optimal_dispatch(sc, 21, 6).objective;
      const double brute = exhaustive_minimum(sc, 21, 6);
      worst = std::max(worst, std::abs(dp - brute));
    }
  ok = worst <= 1e-9;
  detail += fmt("DP vs enumeration max |diff| %.1e; ", worst);

  // PPO on the 24-step instance, scored on the DP objective.
  for (auto preset : {Preset::high, Preset::low, Preset::mixed}) {
    Scenario sc = make_scenario(preset, 1, 1, 1.0);
    sc.action_levels = 5;
    sc.weights.beta = 0.0;  // reward = -(energy cost + SLA penalty), the DP objective
    const double dp = dp_optimal_dispatch(sc, 21, 24).objective;
    PPOConfig cfg;
    cfg.updates = 100;
    cfg.select_every = 10;
    const std::vector<Scenario> training{sc};
    const auto trained = train(training, cfg, {}, 1);
    const auto run = run_episode(sc, ppo_controller(trained.policy, sc), 0);
    double cost = 0.0;
    for (const auto& s : run.log.steps) cost += s.outcome.energy_cost + sc.weights.sla_penalty * s.outcome.unserved_kwh;
    const double gap = (cost - dp) / dp;
    ok = ok && gap <= 0.20;
    detail += preset_name(preset) + fmt(" %.2f", cost) + fmt(" vs DP %.2f", dp) + fmt(" (%+.2f%%); ", 100.0 * gap);
  }
  return {ok, detail};
}

Verdict gradients(Protocol&) {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  const ObservationSpec obs;
  const auto full = nn::grad_check(nn::NetworkConfig::desk_default(obs.window, obs.features(), 11), 1, 100, 1e-4);
  for (const auto& g : full.groups) {
    ok = ok && g.max_rel_error < 1e-3 && g.coordinates > 0;
    detail += (g.group == "policy" ? std::string("policy softmax") : g.group) + fmt(" %.1e; ", g.max_rel_error);
  }
  const auto dense = nn::grad_check(nn::NetworkConfig::dense_only(obs.window, obs.features(), 11), 2, 100, 1e-4);
  ok = ok && dense.max_rel_error() < 1e-6;
  detail += fmt("dense-only %.1e; ", dense.max_rel_error());
  const double secs = seconds_since(t0);
  ok = ok && secs < 60.0;
  detail += fmt("%.1f s", secs);
  return {ok, detail};
}

Verdict dynamics(Protocol&) {
  Rng rng(2024);
  const Preset presets[] = {Preset::high, Preset::low, Preset::mixed};
  std::size_t steps = 0, soc_bad = 0, conservation_bad = 0;
  double worst = 0.0;
  for (std::uint64_t ep = 0; steps < 1000000; ++ep) {
    Scenario sc = make_scenario(presets[ep % 3], 7, 500 + ep, rng.uniform() < 0.5 ? 0.25 : 1.0);
    sc.grid_charging = rng.uniform() < 0.5;
    sc.action_levels = 3 + 2 * static_cast<int>(rng.below(5));
    for (auto& c : sc.series.grid_cap_kw) c *= 0.2 + rng.uniform();
    const auto& b = sc.battery;
    EnvState s = reset(sc, ep);
    s.soc_kwh = b.soc_min_kwh + rng.uniform() * b.range_kwh();
    while (!s.done && steps < 1000000) {
      const Action a{static_cast<int>(rng.below(static_cast<std::uint64_t>(sc.action_levels)))};
      const auto tr = step(sc, s, a);
      const auto& o = tr.outcome;
      ++steps;
      if (tr.next.soc_kwh < b.soc_min_kwh || tr.next.soc_kwh > b.soc_max_kwh) ++soc_bad;
      const double e1 = std::abs(o.renewable_used_kwh + o.discharge_kwh + (o.grid_kwh - o.grid_charge_kwh) +
                                 o.unserved_kwh - o.demand_kwh);
      const double e2 =
          std::abs(o.renewable_used_kwh + o.curtailed_kwh + (o.charge_kwh - o.grid_charge_kwh) - o.renewable_kwh);
      const double e3 =
          std::abs(tr.next.soc_kwh - (s.soc_kwh + b.charge_eff * o.charge_kwh - o.discharge_kwh / b.discharge_eff));
      const double e = std::max({e1, e2, e3});
      worst = std::max(worst, e);
      if (e > 1e-9) ++conservation_bad;
      s = tr.next;
    }
  }
  return {soc_bad == 0 && conservation_bad == 0,
          std::to_string(steps) + " steps, " + std::to_string(soc_bad) + " SOC violations, " +
              std::to_string(conservation_bad) + " conservation violations" + fmt(" (max residual %.1e kWh)", worst)};
}

Verdict metric_oracle(Protocol&) {
  Rng rng(77);
  const Preset presets[] = {Preset::high, Preset::low, Preset::mixed};
  double worst = 0.0;
  int episodes = 0, with_sla = 0;
  for (int i = 0; i < 100; ++i) {
    Scenario sc = make_scenario(presets[i % 3], 1 + static_cast<int>(rng.below(7)), 900 + static_cast<std::uint64_t>(i));
    if (i % 2) for (auto& c : sc.series.grid_cap_kw) c *= 0.3 + 0.6 * rng.uniform();
    EpisodeLog log;
    log.scenario = sc.label;
    log.seed = static_cast<std::uint64_t>(i);
    EnvState s = reset(sc, log.seed);
    while (!s.done) {
      const Action a{static_cast<int>(rng.below(static_cast<std::uint64_t>(sc.action_levels)))};
      const auto tr = step(sc, s, a);
      log.steps.push_back({s, a, tr.outcome});
      s = tr.next;
    }
    const std::string text = to_jsonl(log);
    const auto r = evaluate(episode_from_jsonl(text));
    const auto b = brute_force_metrics(text);
    for (double d : {r.energy_cost - b.energy_cost, static_cast<double>(r.sla_violations) - b.sla_count,
                     r.sla_rate - b.sla_rate, r.energy_efficiency - b.efficiency, r.cumulative_reward - b.reward,
                     r.carbon_emissions_kg - b.emissions})
      worst = std::max(worst, std::abs(d));
    ++episodes;
    if (b.sla_count > 0) ++with_sla;
  }
  return {worst <= 1e-9, std::to_string(episodes) + " episodes (" + std::to_string(with_sla) +
                             " with SLA violations)" + fmt(", max |diff| %.1e", worst)};
}

Verdict preprocessing(Protocol&) {
  Rng rng(8);
  bool in_range = true;
  double worst_round = 0.0, worst_slack_ratio = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const Preset presets[] = {Preset::high, Preset::low, Preset::mixed};
    auto recs = series_to_records(synthesize(presets[trial % 3], 2, 40 + static_cast<std::uint64_t>(trial), 1.0 / 12.0));
    for (auto& r : recs) *r.demand_kw *= 0.8 + 0.4 * rng.uniform();
    const auto data = preprocess(recs, 0.25);
    for (const auto& r : data.records)
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        if (f == static_cast<std::size_t>(Feature::soc) && !data.has_soc) continue;
        const double n = r.normalized[f];
        if (!(n >= 0.0 && n <= 1.0)) in_range = false;
        const auto range = data.stats.ranges[f];
        const double scale = std::max({1.0, std::abs(range.min), std::abs(range.max)});
        worst_round = std::max(worst_round, std::abs(denormalize(n, range) - r.raw[f]) / scale);
      }
    // Aggregation energy slack on a randomly offset regular trace.
    std::vector<RawRecord> raw;
    const EpochSeconds start = 60 * static_cast<EpochSeconds>(rng.below(15));
    double raw_energy = 0.0, peak = 0.0;
    const int n = 20 + static_cast<int>(rng.below(500));
    for (int i = 0; i < n; ++i) {
      RawRecord r;
      r.timestamp = start + i * 300;
      r.solar_kw = 0.0;
      r.wind_kw = 0.0;
      r.demand_kw = 100.0 + 400.0 * rng.uniform();
      r.grid_price_per_kwh = 0.1;
      raw_energy += *r.demand_kw * 300.0 / 3600.0;
      peak = std::max(peak, *r.demand_kw);
      raw.push_back(r);
    }
    double agg_energy = 0.0;
    for (const auto& r : aggregate(raw, 0.25)) agg_energy += *r.demand_kw * 0.25;
    worst_slack_ratio = std::max(worst_slack_ratio, std::abs(raw_energy - agg_energy) / (peak * 0.25));
  }
  // Direct min-max round trips over random ranges.
  for (int i = 0; i < 100000; ++i) {
    const double a = (rng.uniform() - 0.5) * 1e4, b = a + rng.uniform() * 1e3 + 1e-6;
    const double x = a + rng.uniform() * (b - a);
    const double nx = minmax_normalize(x, {a, b});
    if (!(nx >= 0.0 && nx <= 1.0)) in_range = false;
    worst_round = std::max(worst_round, std::abs(denormalize(nx, {a, b}) - x) / std::max({1.0, std::abs(a), std::abs(b)}));
  }
  return {in_range && worst_round <= 1e-12 && worst_slack_ratio <= 1.0,
          std::string(in_range ? "normalized values in [0,1]" : "normalized value outside [0,1]") +
              fmt(", round trip %.1e (relative to range magnitude)", worst_round) +
              fmt(", energy slack used %.2f of max|raw|*dt", worst_slack_ratio)};
}

std::vector<std::pair<std::string, std::string>> read_tree(const fs::path& root) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.emplace_back(fs::relative(e.path(), root).string(), read_file(e.path().string()));
  std::sort(files.begin(), files.end());
  return files;
}

Verdict determinism(Protocol&) {
  ExperimentPlan plan;
  plan.label = "determinism";
  plan.seeds = {1, 2};
  plan.episode_days = 2;
  plan.training_weeks = 1;
  plan.ppo.updates = 6;
  plan.ppo.select_every = 3;
  plan.q.episodes = 200;
  plan.sweep = {"recurrent_units", {16, 32}};
  const fs::path base = fs::temp_directory_path() / "greendc_acceptance_determinism";
  fs::remove_all(base);
  std::vector<std::vector<std::pair<std::string, std::string>>> trees;
  for (const char* run : {"a", "b"}) {
    ExperimentRunner runner(plan);
    ReportSet rs;
    rs.plan_label = plan.label;
    rs.episode_days = plan.episode_days;
    rs.timestep_hours = plan.timestep_hours;
    rs.comparison = runner.comparison();
    rs.ablation = runner.ablation();
    rs.sweep = runner.sweep();
    emit_report(rs, (base / run).string());
    trees.push_back(read_tree(base / run));
  }
  std::size_t logs = 0, csvs = 0;
  for (const auto& [name, body] : trees[0]) {
    if (name.ends_with(".jsonl")) ++logs;
    if (name.ends_with(".csv")) ++csvs;
  }
  const bool same = trees[0] == trees[1] && !trees[0].empty();
  fs::remove_all(base);
  return {same && logs > 0, std::to_string(trees[0].size()) + " files (" + std::to_string(logs) + " episode logs, " +
                                std::to_string(csvs) + " CSVs) " + (same ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict(Protocol&)> run;
  };
  const std::vector<Criterion> criteria{
      {5, "gradient check", gradients},
      {6, "dynamics invariants over 1e6 random steps", dynamics},
      {7, "metrics equal brute force over raw JSONL", metric_oracle},
      {8, "preprocessing ranges, round trip and energy slack", preprocessing},
      {4, "DP oracle and PPO optimality gap", optimality_gap},
      {9, "byte-identical logs and reports", determinism},
      {1, "PPO cost >= 15% below rule-based per scenario", cost_reduction},
      {2, "reward ordering PPO >= Q >= rule, PPO lowest SLA rate", baseline_ordering},
      {3, "full system beats each ablation", ablation_direction},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  Protocol protocol;
  int failed = 0;
  std::vector<std::string> lines(10);
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = c.run(protocol);
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::ostringstream line;
    line << (v.pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.name << " -- " << v.detail
         << fmt(" [%.0f s]", seconds_since(t0));
    lines[static_cast<std::size_t>(c.id)] = line.str();
    std::printf("%s\n", line.str().c_str());
    std::fflush(stdout);
  }
  std::printf("\nsummary:\n");
  for (const auto& l : lines)
    if (!l.empty()) std::printf("%s\n", l.c_str());
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
