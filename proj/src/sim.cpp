#include "greendc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace greendc {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw SimError(what);
}

bool all_nonneg_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x) && x >= 0.0; });
}

}  // namespace

double ExogenousSeries::storage_price(std::size_t t) const {
  if (storage_price_per_kwh.size() == 1) return storage_price_per_kwh.front();
  return storage_price_per_kwh.at(t);
}

void ExogenousSeries::validate() const {
  const std::size_t n = demand_kw.size();
  require(n >= 1, "series must contain at least one step");
  require(solar_kw.size() == n && wind_kw.size() == n && grid_price_per_kwh.size() == n &&
              grid_cap_kw.size() == n,
          "series sequences must have equal length");
  require(storage_price_per_kwh.size() == 1 || storage_price_per_kwh.size() == n,
          "storage price must be a scalar or a full-length sequence");
  require(std::isfinite(timestep_hours) && timestep_hours > 0.0, "timestep must be positive");
  require(all_nonneg_finite(demand_kw), "demand must be finite and >= 0");
  require(all_nonneg_finite(solar_kw), "solar must be finite and >= 0");
  require(all_nonneg_finite(wind_kw), "wind must be finite and >= 0");
  require(all_nonneg_finite(grid_price_per_kwh), "grid price must be finite and >= 0");
  require(all_nonneg_finite(storage_price_per_kwh), "storage price must be finite and >= 0");
  require(all_nonneg_finite(grid_cap_kw), "grid cap must be finite and >= 0");
  require(std::isfinite(emission_factor_kg_per_kwh) && emission_factor_kg_per_kwh >= 0.0,
          "emission factor must be finite and >= 0");
}

void LoadModel::validate() const {
  require(std::isfinite(base_load_kw) && base_load_kw >= 0.0, "base load must be >= 0");
  require(activity_load.size() == cooling_overhead.size(),
          "activity and cooling sequences must have equal length");
  require(all_nonneg_finite(activity_load), "activity load must be >= 0");
  require(all_nonneg_finite(cooling_overhead), "cooling overhead must be >= 0");
}

double demand_at(const LoadModel& load, std::size_t t) {
  if (t >= load.activity_load.size() || t >= load.cooling_overhead.size())
    throw SimError("demand_at: step " + std::to_string(t) + " out of range");
  const double activity = load.activity_load[t];
  const double base = load.mode == LoadMode::utilization ? load.base_load_kw * activity
                                                         : load.base_load_kw + activity;
  return base + load.cooling_overhead[t];
}

std::vector<double> demand_series(const LoadModel& load) {
  load.validate();
  std::vector<double> out(load.activity_load.size());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = demand_at(load, t);
  return out;
}

double renewable_at(const ExogenousSeries& series, std::size_t t) {
  if (t >= series.solar_kw.size() || t >= series.wind_kw.size())
    throw SimError("renewable_at: step " + std::to_string(t) + " out of range");
  return series.solar_kw[t] + series.wind_kw[t];
}

void BatterySpec::validate() const {
  require(std::isfinite(soc_min_kwh) && soc_min_kwh >= 0.0, "SOC_min must be >= 0");
  require(std::isfinite(soc_max_kwh) && soc_max_kwh > soc_min_kwh, "SOC_max must exceed SOC_min");
  require(charge_eff > 0.0 && charge_eff <= 1.0, "charge efficiency must be in (0,1]");
  require(discharge_eff > 0.0 && discharge_eff <= 1.0, "discharge efficiency must be in (0,1]");
  require(max_charge_kw > 0.0 && std::isfinite(max_charge_kw), "max charge power must be > 0");
  require(max_discharge_kw > 0.0 && std::isfinite(max_discharge_kw),
          "max discharge power must be > 0");
  require(initial_soc_kwh >= soc_min_kwh && initial_soc_kwh <= soc_max_kwh,
          "initial SOC must lie within [SOC_min, SOC_max]");
}

void RewardWeights::validate() const {
  require(alpha >= 0.0 && beta >= 0.0 && sla_penalty >= 0.0, "reward weights must be >= 0");
}

void Scenario::validate() const {
  series.validate();
  battery.validate();
  weights.validate();
  require(action_levels >= 3, "action space needs at least 3 levels");
}

double setpoint_kw(Action action, const BatterySpec& battery, int levels) {
  if (action.index < 0 || action.index >= levels)
    throw SimError("action index " + std::to_string(action.index) + " out of range");
  const int mid = levels / 2;
  if (action.index == mid) return 0.0;
  if (action.index < mid)
    return -battery.max_discharge_kw * static_cast<double>(mid - action.index) / mid;
  return battery.max_charge_kw * static_cast<double>(action.index - mid) / (levels - 1 - mid);
}

Action idle_action(int levels) { return Action{levels / 2}; }
Action max_charge_action(int levels) { return Action{levels - 1}; }
Action max_discharge_action(int /*levels*/) { return Action{0}; }

EnvState reset(const Scenario& scenario, std::uint64_t /*seed*/) {
  scenario.validate();
  return EnvState{0, scenario.battery.initial_soc_kwh, false};
}

double reward_from(const StepOutcome& o, const RewardWeights& w) {
  return -(w.alpha * (o.grid_price_per_kwh * o.grid_kwh + o.storage_price_per_kwh * o.discharge_kwh) +
           w.beta * o.emissions_kg) -
         w.sla_penalty * o.unserved_kwh;
}

StepConditions conditions_at(const ExogenousSeries& s, std::size_t t) {
  StepConditions c;
  c.timestep_hours = s.timestep_hours;
  c.demand_kw = s.demand_kw[t];
  c.renewable_kw = renewable_at(s, t);
  c.grid_price_per_kwh = s.grid_price_per_kwh[t];
  c.storage_price_per_kwh = s.storage_price(t);
  c.grid_cap_kw = s.grid_cap_kw[t];
  c.emission_factor_kg_per_kwh = s.emission_factor_kg_per_kwh;
  return c;
}

StepOutcome dispatch(const Scenario& scenario, const StepConditions& c, double& soc, Action action) {
  const auto& b = scenario.battery;
  const double setpoint = setpoint_kw(action, b, scenario.action_levels);
  const double dt = c.timestep_hours;

  StepOutcome o;
  o.demand_kwh = c.demand_kw * dt;
  o.renewable_kwh = c.renewable_kw * dt;
  o.grid_price_per_kwh = c.grid_price_per_kwh;
  o.storage_price_per_kwh = c.storage_price_per_kwh;
  o.emission_factor_kg_per_kwh = c.emission_factor_kg_per_kwh;

  // (1) renewables serve demand first
  o.renewable_used_kwh = std::min(o.renewable_kwh, o.demand_kwh);
  const double surplus = o.renewable_kwh - o.renewable_used_kwh;
  double deficit = o.demand_kwh - o.renewable_used_kwh;

  // (2) surplus charges the battery up to the setpoint, the rest is curtailed
  if (setpoint > 0.0 && surplus > 0.0) {
    const double headroom = std::max(0.0, b.soc_max_kwh - soc);
    o.charge_kwh = std::min({setpoint * dt, b.max_charge_kw * dt, headroom / b.charge_eff, surplus});
  }
  o.curtailed_kwh = surplus - o.charge_kwh;

  // (3) deficit served by discharge within power and energy limits
  if (setpoint < 0.0 && deficit > 0.0) {
    const double available = b.discharge_eff * std::max(0.0, soc - b.soc_min_kwh);
    o.discharge_kwh = std::min({-setpoint * dt, b.max_discharge_kw * dt, available, deficit});
  }
  deficit -= o.discharge_kwh;

  // (4) grid slack up to its cap, (5) remainder is unserved
  const double grid_cap_kwh = c.grid_cap_kw * dt;
  const double grid_to_load = std::min(deficit, grid_cap_kwh);
  o.unserved_kwh = deficit - grid_to_load;
  o.sla_violated = o.unserved_kwh > 0.0;

  if (scenario.grid_charging && setpoint > 0.0) {
    const double headroom = std::max(0.0, b.soc_max_kwh - soc - b.charge_eff * o.charge_kwh);
    o.grid_charge_kwh = std::max(
        0.0, std::min({setpoint * dt - o.charge_kwh, b.max_charge_kw * dt - o.charge_kwh,
                       headroom / b.charge_eff, grid_cap_kwh - grid_to_load}));
    o.charge_kwh += o.grid_charge_kwh;
  }
  o.grid_kwh = grid_to_load + o.grid_charge_kwh;

  soc += b.charge_eff * o.charge_kwh - o.discharge_kwh / b.discharge_eff;
  soc = std::clamp(soc, b.soc_min_kwh, b.soc_max_kwh);

  o.energy_cost = o.grid_price_per_kwh * o.grid_kwh + o.storage_price_per_kwh * o.discharge_kwh;
  o.emissions_kg = o.grid_kwh * o.emission_factor_kg_per_kwh;
  o.reward = reward_from(o, scenario.weights);

  return o;
}

Transition step(const Scenario& scenario, const EnvState& state, Action action) {
  if (state.done) throw SimError("step called on a finished episode");
  const auto& s = scenario.series;
  if (state.t >= s.size()) throw SimError("step index beyond horizon");
  const std::size_t t = state.t;
  double soc = state.soc_kwh;
  const StepOutcome o = dispatch(scenario, conditions_at(s, t), soc, action);

  Transition tr;
  tr.outcome = o;
  tr.next.t = t + 1;
  tr.next.soc_kwh = soc;
  tr.next.done = tr.next.t >= s.size();
  return tr;
}

// ---------------------------------------------------------------------------
// JSON-lines episode logs

namespace {

nlohmann::json entry_to_json(const EpisodeLog& log, const LogEntry& e) {
  const auto& o = e.outcome;
  nlohmann::ordered_json j;
  j["scenario"] = log.scenario;
  j["seed"] = log.seed;
  j["t"] = e.state.t;
  j["soc_kwh"] = e.state.soc_kwh;
  j["action"] = e.action.index;
  j["demand_kwh"] = o.demand_kwh;
  j["renewable_kwh"] = o.renewable_kwh;
  j["renewable_used_kwh"] = o.renewable_used_kwh;
  j["curtailed_kwh"] = o.curtailed_kwh;
  j["charge_kwh"] = o.charge_kwh;
  j["grid_charge_kwh"] = o.grid_charge_kwh;
  j["discharge_kwh"] = o.discharge_kwh;
  j["grid_kwh"] = o.grid_kwh;
  j["unserved_kwh"] = o.unserved_kwh;
  j["grid_price_per_kwh"] = o.grid_price_per_kwh;
  j["storage_price_per_kwh"] = o.storage_price_per_kwh;
  j["emission_factor_kg_per_kwh"] = o.emission_factor_kg_per_kwh;
  j["energy_cost"] = o.energy_cost;
  j["emissions_kg"] = o.emissions_kg;
  j["sla_violated"] = o.sla_violated;
  j["reward"] = o.reward;
  return j;
}

}  // namespace

std::string to_jsonl(const EpisodeLog& log) {
  std::string out;
  for (const auto& e : log.steps) {
    out += entry_to_json(log, e).dump();
    out += '\n';
  }
  return out;
}

EpisodeLog episode_from_jsonl(const std::string& text) {
  EpisodeLog log;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      LogEntry e;
      log.scenario = j.at("scenario").get<std::string>();
      log.seed = j.at("seed").get<std::uint64_t>();
      e.state.t = j.at("t").get<std::size_t>();
      e.state.soc_kwh = j.at("soc_kwh").get<double>();
      e.action.index = j.at("action").get<int>();
      auto& o = e.outcome;
      o.demand_kwh = j.at("demand_kwh").get<double>();
      o.renewable_kwh = j.at("renewable_kwh").get<double>();
      o.renewable_used_kwh = j.at("renewable_used_kwh").get<double>();
      o.curtailed_kwh = j.at("curtailed_kwh").get<double>();
      o.charge_kwh = j.at("charge_kwh").get<double>();
      o.grid_charge_kwh = j.at("grid_charge_kwh").get<double>();
      o.discharge_kwh = j.at("discharge_kwh").get<double>();
      o.grid_kwh = j.at("grid_kwh").get<double>();
      o.unserved_kwh = j.at("unserved_kwh").get<double>();
      o.grid_price_per_kwh = j.at("grid_price_per_kwh").get<double>();
      o.storage_price_per_kwh = j.at("storage_price_per_kwh").get<double>();
      o.emission_factor_kg_per_kwh = j.at("emission_factor_kg_per_kwh").get<double>();
      o.energy_cost = j.at("energy_cost").get<double>();
      o.emissions_kg = j.at("emissions_kg").get<double>();
      o.sla_violated = j.at("sla_violated").get<bool>();
      o.reward = j.at("reward").get<double>();
      log.steps.push_back(e);
    } catch (const nlohmann::json::exception& ex) {
      throw SimError("episode log line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  for (std::size_t i = 0; i < log.steps.size(); ++i)
    log.steps[i].state.done = false;
  return log;
}

void save_jsonl(const EpisodeLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SimError("cannot write " + path);
  out << to_jsonl(log);
  if (!out) throw SimError("write failed: " + path);
}

EpisodeLog load_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SimError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return episode_from_jsonl(ss.str());
}

// ---------------------------------------------------------------------------
// Constraint audit

std::vector<ConstraintViolation> validate_constraints(const EpisodeLog& log,
                                                      const Scenario& scenario) {
  constexpr double tol = 1e-9;
  std::vector<ConstraintViolation> out;
  const auto& b = scenario.battery;
  const double dt = scenario.series.timestep_hours;
  auto soc_ok = [&](double soc) { return soc >= b.soc_min_kwh - tol && soc <= b.soc_max_kwh + tol; };

  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    const auto& e = log.steps[i];
    const auto& o = e.outcome;
    if (!soc_ok(e.state.soc_kwh)) {
      out.push_back({e.state.t, "soc_bounds",
                     "SOC " + std::to_string(e.state.soc_kwh) + " kWh outside [" +
                         std::to_string(b.soc_min_kwh) + ", " + std::to_string(b.soc_max_kwh) + "]"});
    }
    // Supply adequacy with SOC entering as deliverable discharge energy.
    const double available_discharge =
        std::min(b.max_discharge_kw * dt, b.discharge_eff * std::max(0.0, e.state.soc_kwh - b.soc_min_kwh));
    if (o.discharge_kwh > available_discharge + tol) {
      out.push_back({e.state.t, "discharge_limit",
                     "discharge " + std::to_string(o.discharge_kwh) + " kWh exceeds available " +
                         std::to_string(available_discharge) + " kWh"});
    }
    const double supplied = o.renewable_used_kwh + o.discharge_kwh + (o.grid_kwh - o.grid_charge_kwh);
    if (o.unserved_kwh > 0.0 || supplied < o.demand_kwh - tol) {
      out.push_back({e.state.t, "supply_adequacy",
                     "demand " + std::to_string(o.demand_kwh) + " kWh, supplied " +
                         std::to_string(supplied) + " kWh"});
    }
  }
  // Post-step SOC of the final entry is implied by the dynamics.
  if (!log.steps.empty()) {
    const auto& last = log.steps.back();
    const double soc_after = last.state.soc_kwh + b.charge_eff * last.outcome.charge_kwh -
                             last.outcome.discharge_kwh / b.discharge_eff;
    if (!soc_ok(soc_after))
      out.push_back({last.state.t + 1, "soc_bounds", "final SOC outside bounds"});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dynamic-programming dispatch oracle

double snap_soc(double soc_kwh, const BatterySpec& b, int levels) {
  const double cell = b.range_kwh() / (levels - 1);
  const double k = std::round((soc_kwh - b.soc_min_kwh) / cell);
  const double clamped = std::clamp(k, 0.0, static_cast<double>(levels - 1));
  return b.soc_min_kwh + clamped * cell;
}

namespace {

int soc_index(double soc_kwh, const BatterySpec& b, int levels) {
  const double cell = b.range_kwh() / (levels - 1);
  const double k = std::round((soc_kwh - b.soc_min_kwh) / cell);
  return static_cast<int>(std::clamp(k, 0.0, static_cast<double>(levels - 1)));
}

}  // namespace

DispatchPlan dp_optimal_dispatch(const Scenario& scenario, int soc_levels, std::size_t horizon) {
  scenario.validate();
  if (horizon > 200 || soc_levels > 101 || scenario.action_levels > 11)
    throw SimError("dp_optimal_dispatch: instance too large (T<=200, levels<=101, K<=11)");
  if (soc_levels < 2) throw SimError("dp_optimal_dispatch: need at least 2 SOC levels");
  if (horizon > scenario.horizon()) throw SimError("dp_optimal_dispatch: horizon exceeds series");
  const auto& b = scenario.battery;
  const int K = scenario.action_levels;
  const double penalty = scenario.weights.sla_penalty;
  const double cell = b.range_kwh() / (soc_levels - 1);
  const std::size_t T = horizon;
  const auto L = static_cast<std::size_t>(soc_levels);

  // value[t][l]: minimal cost-to-go from grid level l at step t.
  std::vector<double> value((T + 1) * L, 0.0);
  std::vector<int> choice(T * L, 0);
  const int idle = K / 2;

  for (std::size_t tt = T; tt-- > 0;) {
    for (std::size_t l = 0; l < L; ++l) {
      EnvState st{tt, b.soc_min_kwh + static_cast<double>(l) * cell, false};
      double best = std::numeric_limits<double>::infinity();
      int best_a = idle;
      // Visit idle first so ties resolve toward it, then by index.
      for (int n = 0; n < K; ++n) {
        const int a = n == 0 ? idle : (n <= idle ? n - 1 : n);
        const auto tr = step(scenario, st, Action{a});
        const int next = soc_index(tr.next.soc_kwh, b, soc_levels);
        const double c = tr.outcome.energy_cost + penalty * tr.outcome.unserved_kwh +
                         value[(tt + 1) * L + static_cast<std::size_t>(next)];
        if (c < best - 1e-12) {
          best = c;
          best_a = a;
        }
      }
      value[tt * L + l] = best;
      choice[tt * L + l] = best_a;
    }
  }

  std::vector<Action> actions;
  actions.reserve(T);
  int l = soc_index(b.initial_soc_kwh, b, soc_levels);
  double soc = b.soc_min_kwh + l * cell;
  for (std::size_t tt = 0; tt < T; ++tt) {
    const int a = choice[tt * L + static_cast<std::size_t>(l)];
    actions.push_back(Action{a});
    const auto tr = step(scenario, EnvState{tt, soc, false}, Action{a});
    l = soc_index(tr.next.soc_kwh, b, soc_levels);
    soc = b.soc_min_kwh + l * cell;
  }
  DispatchPlan plan = replay_plan(scenario, actions, soc_levels, true);
  return plan;
}

DispatchPlan replay_plan(const Scenario& scenario, const std::vector<Action>& actions,
                         int soc_levels, bool snap) {
  const auto& b = scenario.battery;
  DispatchPlan plan;
  plan.actions = actions;
  double soc = snap ? snap_soc(b.initial_soc_kwh, b, soc_levels) : b.initial_soc_kwh;
  for (std::size_t t = 0; t < actions.size(); ++t) {
    const auto tr = step(scenario, EnvState{t, soc, false}, actions[t]);
    plan.energy_cost += tr.outcome.energy_cost;
    plan.unserved_kwh += tr.outcome.unserved_kwh;
    soc = snap ? snap_soc(tr.next.soc_kwh, b, soc_levels) : tr.next.soc_kwh;
  }
  plan.objective = plan.energy_cost + scenario.weights.sla_penalty * plan.unserved_kwh;
  return plan;
}

}  // namespace greendc
