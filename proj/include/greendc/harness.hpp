#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "greendc/agents.hpp"
#include "greendc/metrics.hpp"
#include "greendc/traces.hpp"

namespace greendc {

class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class AgentKind { ppo, rule_based, heuristic, tabular_q };

std::string agent_name(AgentKind a);  // "ppo", "rule_based", "heuristic", "tabular_q"
AgentKind parse_agent(const std::string& name);

inline constexpr const char* kSweepAxes[] = {"recurrent_units", "conv_filters", "minibatch_size",
                                              "learning_rate"};

struct SweepAxis {
  std::string name;
  std::vector<double> values;
};

// PPO settings used by the experiment plans: the standard defaults with a
// shorter discount and GAE horizon, a larger annealed step size and periodic
// greedy selection on the training weeks.
PPOConfig desk_ppo_config();

struct ExperimentPlan {
  std::string label = "desk";
  std::vector<Preset> scenarios = {Preset::high, Preset::low, Preset::mixed};
  std::vector<AgentKind> agents = {AgentKind::ppo, AgentKind::rule_based, AgentKind::heuristic,
                                   AgentKind::tabular_q};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int episode_days = 7;
  double timestep_hours = 0.25;
  int training_weeks = 4;  // synthesized weeks per seed used for training
  PPOConfig ppo = desk_ppo_config();
  nn::NetworkConfig network;  // empty hidden list: default architecture
  QConfig q;
  std::vector<AblationFlags> ablations = {{true, false, false}, {false, true, false}, {false, false, true}};
  SweepAxis sweep;
  SuccessGoals goals;
  std::size_t threads = 1;

  void validate() const;
};

// Training weeks and the held-out evaluation week of one (preset, seed).
std::vector<Scenario> training_scenarios(const ExperimentPlan& plan, Preset preset, std::uint64_t seed);
Scenario evaluation_scenario(const ExperimentPlan& plan, Preset preset, std::uint64_t seed);

// One trained-and-evaluated (agent, scenario, seed) combination.
struct CellResult {
  std::string agent;  // agent name, or "ppo_<ablation>" for ablated variants
  std::string scenario;
  std::uint64_t seed = 0;
  MetricReport report;
  EpisodeLog log;
  std::vector<LearningCurvePoint> curve;  // PPO only
};

inline constexpr const char* kMetricNames[] = {"energy_cost", "sla_rate", "energy_efficiency",
                                                "cumulative_reward", "carbon_emissions_kg"};
inline constexpr std::size_t kMetricCount = 5;

struct MetricSummary {
  std::size_t runs = 0;
  double mean[kMetricCount] = {};
  double stdev[kMetricCount] = {};  // sample standard deviation, 0 for one run
  double success_rate = 0.0;

  double mean_of(const std::string& metric) const;
  bool operator==(const MetricSummary&) const;
};

MetricSummary summarize(const std::vector<MetricReport>& reports, const SuccessGoals& goals);

struct ComparisonRow {
  std::string agent;
  std::string scenario;
  MetricSummary metrics;
  double cost_improvement_pct = 0.0;  // mean-cost reduction versus the baseline agent

  bool operator==(const ComparisonRow&) const = default;
};

struct ComparisonTable {
  std::string baseline;  // rule_based when present, else the first agent
  std::vector<ComparisonRow> rows;
  std::vector<CellResult> cells;

  const ComparisonRow& row(const std::string& agent, const std::string& scenario) const;
};

struct AblationRow {
  std::string variant;  // "full" or the ablation label
  std::string scenario;
  MetricSummary metrics;
  double cost_vs_full_pct = 0.0;  // positive when the variant costs more
  bool beats_full_cost = false;   // ordering flag: variant cheaper than the full system
  bool beats_full_reward = false;

  bool operator==(const AblationRow&) const = default;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  std::vector<CellResult> cells;

  const AblationRow& row(const std::string& variant, const std::string& scenario) const;
};

struct SweepRow {
  double value = 0.0;
  MetricSummary metrics;  // over every (scenario, seed) run at this value

  bool operator==(const SweepRow&) const = default;
};

struct SweepTable {
  std::string axis;
  std::vector<SweepRow> rows;
  std::vector<CellResult> cells;
};

// Runs plans while caching trained controllers, so the full PPO system is
// trained once per (scenario, seed) across comparison and ablation tables.
class ExperimentRunner {
 public:
  explicit ExperimentRunner(ExperimentPlan plan);

  const ExperimentPlan& plan() const { return plan_; }
  ComparisonTable comparison();
  AblationTable ablation();
  SweepTable sweep();

 private:
  CellResult run_ppo(Preset preset, std::uint64_t seed, const AblationFlags& flags, const PPOConfig& ppo,
                     const nn::NetworkConfig& network, const std::string& agent_label);
  CellResult run_cell(AgentKind agent, Preset preset, std::uint64_t seed);

  ExperimentPlan plan_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<CellResult>> cache_;
};

ComparisonTable run_comparison(const ExperimentPlan& plan);
AblationTable run_ablation(const ExperimentPlan& plan);
SweepTable run_sweep(const ExperimentPlan& plan);

std::string comparison_csv(const ComparisonTable& table);
std::string ablation_csv(const AblationTable& table);
std::string sweep_csv(const SweepTable& table);
std::vector<ComparisonRow> comparison_rows_from_csv(const std::string& text);
std::vector<AblationRow> ablation_rows_from_csv(const std::string& text);
std::vector<SweepRow> sweep_rows_from_csv(const std::string& text);

struct ReportSet {
  std::string plan_label = "desk";
  int episode_days = 7;
  double timestep_hours = 0.25;
  std::optional<ComparisonTable> comparison;
  std::optional<AblationTable> ablation;
  std::optional<SweepTable> sweep;
};

std::string summary_text(const ReportSet& reports);

// Writes <out>/<plan>/{comparison.csv, ablation.csv, sweep_<axis>.csv,
// summary.txt} and per-cell episode.jsonl / learning_curve.csv under
// <out>/<plan>/<agent>/<scenario>/<seed>/. Returns the written paths.
std::vector<std::string> emit_report(const ReportSet& reports, const std::string& out_dir);

}  // namespace greendc
