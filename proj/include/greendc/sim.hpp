#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace greendc {

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Time-indexed exogenous signals. All sequences share one length; the storage
// price may be given as a single value that applies to every step.
struct ExogenousSeries {
  double timestep_hours = 0.25;
  std::vector<double> demand_kw;
  std::vector<double> solar_kw;
  std::vector<double> wind_kw;
  std::vector<double> grid_price_per_kwh;
  std::vector<double> storage_price_per_kwh{0.0};
  std::vector<double> grid_cap_kw;
  double emission_factor_kg_per_kwh = 0.4;

  std::size_t size() const { return demand_kw.size(); }
  double storage_price(std::size_t t) const;
  void validate() const;
};

enum class LoadMode {
  additive_kw,  // activity load is a power in kW added to the base load
  utilization,  // activity load is a unitless factor scaling the base load
};

struct LoadModel {
  double base_load_kw = 0.0;
  std::vector<double> activity_load;
  std::vector<double> cooling_overhead;
  LoadMode mode = LoadMode::additive_kw;

  void validate() const;
};

double demand_at(const LoadModel& load, std::size_t t);
std::vector<double> demand_series(const LoadModel& load);
double renewable_at(const ExogenousSeries& series, std::size_t t);

struct BatterySpec {
  double soc_min_kwh = 120.0;
  double soc_max_kwh = 1200.0;
  double charge_eff = 0.95;
  double discharge_eff = 0.95;
  double max_charge_kw = 300.0;
  double max_discharge_kw = 300.0;
  double initial_soc_kwh = 660.0;

  double range_kwh() const { return soc_max_kwh - soc_min_kwh; }
  void validate() const;
};

struct RewardWeights {
  double alpha = 1.0;
  double beta = 0.5;
  double sla_penalty = 10.0;

  void validate() const;
};

struct Scenario {
  std::string label = "scenario";
  ExogenousSeries series;
  BatterySpec battery;
  RewardWeights weights;
  int action_levels = 11;
  bool grid_charging = false;

  std::size_t horizon() const { return series.size(); }
  void validate() const;
};

struct EnvState {
  std::size_t t = 0;
  double soc_kwh = 0.0;
  bool done = false;

  bool operator==(const EnvState&) const = default;
};

struct Action {
  int index = 0;

  bool operator==(const Action&) const = default;
};

// Signed battery power for a discrete level: negative discharges, positive
// charges, level K/2 is idle.
double setpoint_kw(Action action, const BatterySpec& battery, int levels);
Action idle_action(int levels);
Action max_charge_action(int levels);
Action max_discharge_action(int levels);

// Accounting of one dispatch step. Energies are kWh over the step. The
// exogenous context (demand, prices, emission factor) is carried along so a
// log can be audited without the scenario it came from.
struct StepOutcome {
  double demand_kwh = 0.0;
  double renewable_kwh = 0.0;
  double renewable_used_kwh = 0.0;
  double curtailed_kwh = 0.0;
  double charge_kwh = 0.0;
  double grid_charge_kwh = 0.0;
  double discharge_kwh = 0.0;
  double grid_kwh = 0.0;
  double unserved_kwh = 0.0;
  double grid_price_per_kwh = 0.0;
  double storage_price_per_kwh = 0.0;
  double emission_factor_kg_per_kwh = 0.0;
  double energy_cost = 0.0;
  double emissions_kg = 0.0;
  bool sla_violated = false;
  double reward = 0.0;

  double served_kwh() const { return demand_kwh - unserved_kwh; }
  bool operator==(const StepOutcome&) const = default;
};

struct Transition {
  EnvState next;
  StepOutcome outcome;
};

// Exogenous inputs of one step, separated from the series so callers can
// evaluate a dispatch under substituted (e.g. forecast) values.
struct StepConditions {
  double timestep_hours = 0.25;
  double demand_kw = 0.0;
  double renewable_kw = 0.0;
  double grid_price_per_kwh = 0.0;
  double storage_price_per_kwh = 0.0;
  double grid_cap_kw = 0.0;
  double emission_factor_kg_per_kwh = 0.0;
};

StepConditions conditions_at(const ExogenousSeries& series, std::size_t t);

// One dispatch under `conditions`; updates `soc_kwh` in place.
StepOutcome dispatch(const Scenario& scenario, const StepConditions& conditions, double& soc_kwh,
                     Action action);

EnvState reset(const Scenario& scenario, std::uint64_t seed);
Transition step(const Scenario& scenario, const EnvState& state, Action action);

// Reward as a function of the outcome fields and the weights.
double reward_from(const StepOutcome& outcome, const RewardWeights& weights);

struct LogEntry {
  EnvState state;  // state before the step
  Action action;
  StepOutcome outcome;

  bool operator==(const LogEntry&) const = default;
};

struct EpisodeLog {
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<LogEntry> steps;

  std::size_t size() const { return steps.size(); }
};

std::string to_jsonl(const EpisodeLog& log);
EpisodeLog episode_from_jsonl(const std::string& text);
void save_jsonl(const EpisodeLog& log, const std::string& path);
EpisodeLog load_jsonl(const std::string& path);

struct ConstraintViolation {
  std::size_t t = 0;
  std::string kind;  // "soc_bounds", "supply_adequacy", "discharge_limit", "horizon"
  std::string detail;
};

std::vector<ConstraintViolation> validate_constraints(const EpisodeLog& log,
                                                      const Scenario& scenario);

struct DispatchPlan {
  double objective = 0.0;  // energy cost + sla_penalty * unserved
  double energy_cost = 0.0;
  double unserved_kwh = 0.0;
  std::vector<Action> actions;
};

// Snaps a SOC value to the nearest point of a uniform grid over
// [soc_min, soc_max] with `levels` points.
double snap_soc(double soc_kwh, const BatterySpec& battery, int levels);

// Exact minimum of summed energy cost (plus the SLA penalty on unserved
// energy) over the discretized SOC grid, using `step` for transitions.
DispatchPlan dp_optimal_dispatch(const Scenario& scenario, int soc_levels, std::size_t horizon);

// Replays actions through `step`, optionally snapping SOC after each step the
// way the dynamic program does.
DispatchPlan replay_plan(const Scenario& scenario, const std::vector<Action>& actions,
                         int soc_levels, bool snap);

}  // namespace greendc
