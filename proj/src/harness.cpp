#include "greendc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <thread>

#include "greendc/util.hpp"

namespace greendc {

std::string agent_name(AgentKind a) {
  switch (a) {
    case AgentKind::ppo: return "ppo";
    case AgentKind::rule_based: return "rule_based";
    case AgentKind::heuristic: return "heuristic";
    case AgentKind::tabular_q: return "tabular_q";
  }
  return "?";
}

AgentKind parse_agent(const std::string& name) {
  for (auto a : {AgentKind::ppo, AgentKind::rule_based, AgentKind::heuristic, AgentKind::tabular_q})
    if (agent_name(a) == name) return a;
  throw HarnessError("unknown agent '" + name + "' (expected ppo, rule_based, heuristic or tabular_q)");
}

PPOConfig desk_ppo_config() {
  PPOConfig c;
  c.gamma = 0.95;
  c.lambda = 0.8;
  c.learning_rate = 1e-3;
  c.anneal_learning_rate = true;
  c.select_every = 10;
  c.updates = 300;
  return c;
}

namespace {

bool known_axis(const std::string& name) {
  for (const char* a : kSweepAxes)
    if (name == a) return true;
  return false;
}

}  // namespace

void ExperimentPlan::validate() const {
  if (label.empty() || label.find_first_of("/\\") != std::string::npos)
    throw HarnessError("plan label must be a non-empty file name");
  if (scenarios.empty()) throw HarnessError("plan needs at least one scenario");
  if (agents.empty()) throw HarnessError("plan needs at least one agent");
  if (seeds.empty()) throw HarnessError("plan needs at least one seed");
  if (episode_days < 1) throw HarnessError("episode_days must be >= 1");
  if (!(timestep_hours > 0.0) || timestep_hours > 24.0) throw HarnessError("timestep_hours must be in (0, 24]");
  if (training_weeks < 1) throw HarnessError("training_weeks must be >= 1");
  ppo.validate();
  q.validate();
  goals.validate();
  if (!sweep.name.empty() && !known_axis(sweep.name))
    throw HarnessError("unknown sweep axis '" + sweep.name +
                       "' (expected recurrent_units, conv_filters, minibatch_size or learning_rate)");
}

std::vector<Scenario> training_scenarios(const ExperimentPlan& plan, Preset preset, std::uint64_t seed) {
  std::vector<Scenario> out;
  for (int i = 0; i < plan.training_weeks; ++i)
    out.push_back(make_scenario(preset, plan.episode_days, mix_seed(seed, 100 + static_cast<std::uint64_t>(i)),
                                plan.timestep_hours));
  return out;
}

Scenario evaluation_scenario(const ExperimentPlan& plan, Preset preset, std::uint64_t seed) {
  return make_scenario(preset, plan.episode_days, mix_seed(seed, 999), plan.timestep_hours);
}

// ---------------------------------------------------------------------------
// Summaries

double MetricSummary::mean_of(const std::string& metric) const {
  for (std::size_t i = 0; i < kMetricCount; ++i)
    if (metric == kMetricNames[i]) return mean[i];
  if (metric == "success_rate") return success_rate;
  throw HarnessError("unknown metric '" + metric + "'");
}

bool MetricSummary::operator==(const MetricSummary& o) const {
  return runs == o.runs && std::equal(mean, mean + kMetricCount, o.mean) &&
         std::equal(stdev, stdev + kMetricCount, o.stdev) && success_rate == o.success_rate;
}

namespace {

double metric_value(const MetricReport& r, std::size_t i) {
  switch (i) {
    case 0: return r.energy_cost;
    case 1: return r.sla_rate;
    case 2: return r.energy_efficiency;
    case 3: return r.cumulative_reward;
    default: return r.carbon_emissions_kg;
  }
}

}  // namespace

MetricSummary summarize(const std::vector<MetricReport>& reports, const SuccessGoals& goals) {
  MetricSummary s;
  s.runs = reports.size();
  if (reports.empty()) return s;
  const double n = static_cast<double>(reports.size());
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    double sum = 0.0;
    for (const auto& r : reports) sum += metric_value(r, i);
    s.mean[i] = sum / n;
    if (reports.size() > 1) {
      double ss = 0.0;
      for (const auto& r : reports) ss += (metric_value(r, i) - s.mean[i]) * (metric_value(r, i) - s.mean[i]);
      s.stdev[i] = std::sqrt(ss / (n - 1.0));
    }
  }
  s.success_rate = success_rate(reports, goals);
  return s;
}

const ComparisonRow& ComparisonTable::row(const std::string& agent, const std::string& scenario) const {
  for (const auto& r : rows)
    if (r.agent == agent && r.scenario == scenario) return r;
  throw HarnessError("comparison table has no row " + agent + "/" + scenario);
}

const AblationRow& AblationTable::row(const std::string& variant, const std::string& scenario) const {
  for (const auto& r : rows)
    if (r.variant == variant && r.scenario == scenario) return r;
  throw HarnessError("ablation table has no row " + variant + "/" + scenario);
}

// ---------------------------------------------------------------------------
// Runner

namespace {

// Runs jobs on up to `threads` workers; results land in job order.
void run_jobs(std::vector<std::function<void()>>& jobs, std::size_t threads) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, jobs.size()));
  if (workers == 1) {
    for (auto& j : jobs) j();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs.size(); i = next++) {
        try {
          jobs[i]();
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string cell_key(const std::string& agent, Preset preset, std::uint64_t seed) {
  return agent + "|" + preset_name(preset) + "|" + std::to_string(seed);
}

std::string ppo_label(const AblationFlags& flags) {
  return flags.any() ? "ppo_" + ablation_label(flags) : "ppo";
}

double improvement_pct(double baseline, double value) {
  if (baseline == 0.0) return 0.0;
  return 100.0 * (baseline - value) / baseline;
}

}  // namespace

ExperimentRunner::ExperimentRunner(ExperimentPlan plan) : plan_(std::move(plan)) { plan_.validate(); }

CellResult ExperimentRunner::run_ppo(Preset preset, std::uint64_t seed, const AblationFlags& flags,
                                     const PPOConfig& ppo, const nn::NetworkConfig& network,
                                     const std::string& agent_label) {
  const auto training = training_scenarios(plan_, preset, seed);
  const Scenario eval = evaluation_scenario(plan_, preset, seed);
  const auto trained = train(training, ppo, flags, seed, network);
  CellResult cell;
  cell.agent = agent_label;
  cell.scenario = preset_name(preset);
  cell.seed = seed;
  cell.log = run_episode(eval, ppo_controller(trained.policy, eval), seed).log;
  cell.report = evaluate(cell.log, plan_.goals);
  cell.curve = trained.curve;
  return cell;
}

CellResult ExperimentRunner::run_cell(AgentKind agent, Preset preset, std::uint64_t seed) {
  if (agent == AgentKind::ppo) return run_ppo(preset, seed, {}, plan_.ppo, plan_.network, "ppo");
  const Scenario eval = evaluation_scenario(plan_, preset, seed);
  CellResult cell;
  cell.agent = agent_name(agent);
  cell.scenario = preset_name(preset);
  cell.seed = seed;
  if (agent == AgentKind::rule_based) {
    cell.log = run_episode(eval, rule_based_controller(eval), seed).log;
  } else if (agent == AgentKind::heuristic) {
    const auto training = training_scenarios(plan_, preset, seed);
    cell.log = run_episode(eval, heuristic_controller(eval, fit_renewable_forecaster(training)), seed).log;
  } else {
    const auto training = training_scenarios(plan_, preset, seed);
    const QTable table = tabular_q_train(training, plan_.q, seed);
    cell.log = run_episode(eval, tabular_q_controller(table, eval), seed).log;
  }
  cell.report = evaluate(cell.log, plan_.goals);
  return cell;
}

namespace {

struct CellJob {
  std::string key;
  std::function<CellResult()> run;
};

}  // namespace

// Runs the jobs whose keys are not cached yet, then returns every job's
// result in input order.
static std::vector<std::shared_ptr<CellResult>> run_cached(std::vector<CellJob> jobs, std::size_t threads,
                                                           std::mutex& mutex,
                                                           std::map<std::string, std::shared_ptr<CellResult>>& cache) {
  std::vector<std::function<void()>> pending;
  std::vector<std::string> seen;
  for (auto& job : jobs) {
    {
      std::lock_guard lock(mutex);
      if (cache.count(job.key) || std::find(seen.begin(), seen.end(), job.key) != seen.end()) continue;
    }
    seen.push_back(job.key);
    pending.push_back([&job, &mutex, &cache] {
      auto result = std::make_shared<CellResult>(job.run());
      std::lock_guard lock(mutex);
      cache[job.key] = std::move(result);
    });
  }
  run_jobs(pending, threads);
  std::vector<std::shared_ptr<CellResult>> out;
  std::lock_guard lock(mutex);
  for (const auto& job : jobs) out.push_back(cache.at(job.key));
  return out;
}

ComparisonTable ExperimentRunner::comparison() {
  std::vector<CellJob> jobs;
  for (auto preset : plan_.scenarios)
    for (auto agent : plan_.agents)
      for (auto seed : plan_.seeds)
        jobs.push_back({cell_key(agent_name(agent), preset, seed),
                        [this, agent, preset, seed] { return run_cell(agent, preset, seed); }});
  const auto results = run_cached(std::move(jobs), plan_.threads, mutex_, cache_);

  ComparisonTable table;
  const bool has_rule =
      std::find(plan_.agents.begin(), plan_.agents.end(), AgentKind::rule_based) != plan_.agents.end();
  table.baseline = has_rule ? agent_name(AgentKind::rule_based) : agent_name(plan_.agents.front());
  std::size_t k = 0;
  for (auto preset : plan_.scenarios) {
    const std::size_t first = table.rows.size();
    for (auto agent : plan_.agents) {
      std::vector<MetricReport> reports;
      for (std::size_t s = 0; s < plan_.seeds.size(); ++s, ++k) {
        reports.push_back(results[k]->report);
        table.cells.push_back(*results[k]);
      }
      table.rows.push_back({agent_name(agent), preset_name(preset), summarize(reports, plan_.goals), 0.0});
    }
    double base_cost = 0.0;
    for (std::size_t i = first; i < table.rows.size(); ++i)
      if (table.rows[i].agent == table.baseline) base_cost = table.rows[i].metrics.mean[0];
    for (std::size_t i = first; i < table.rows.size(); ++i)
      table.rows[i].cost_improvement_pct = improvement_pct(base_cost, table.rows[i].metrics.mean[0]);
  }
  return table;
}

AblationTable ExperimentRunner::ablation() {
  std::vector<AblationFlags> variants{AblationFlags{}};
  for (const auto& f : plan_.ablations)
    if (std::find(variants.begin(), variants.end(), f) == variants.end()) variants.push_back(f);

  std::vector<CellJob> jobs;
  for (auto preset : plan_.scenarios)
    for (const auto& flags : variants)
      for (auto seed : plan_.seeds)
        jobs.push_back({cell_key(ppo_label(flags), preset, seed), [this, flags, preset, seed] {
                          return run_ppo(preset, seed, flags, plan_.ppo, plan_.network, ppo_label(flags));
                        }});
  const auto results = run_cached(std::move(jobs), plan_.threads, mutex_, cache_);

  AblationTable table;
  std::size_t k = 0;
  for (auto preset : plan_.scenarios) {
    const std::size_t first = table.rows.size();
    for (const auto& flags : variants) {
      std::vector<MetricReport> reports;
      for (std::size_t s = 0; s < plan_.seeds.size(); ++s, ++k) {
        reports.push_back(results[k]->report);
        table.cells.push_back(*results[k]);
      }
      AblationRow row;
      row.variant = ablation_label(flags);
      row.scenario = preset_name(preset);
      row.metrics = summarize(reports, plan_.goals);
      table.rows.push_back(row);
    }
    const MetricSummary full = table.rows[first].metrics;
    for (std::size_t i = first; i < table.rows.size(); ++i) {
      auto& r = table.rows[i];
      r.cost_vs_full_pct = -improvement_pct(full.mean[0], r.metrics.mean[0]);
      r.beats_full_cost = r.metrics.mean[0] < full.mean[0];
      r.beats_full_reward = r.metrics.mean[3] > full.mean[3];
    }
  }
  return table;
}

namespace {

void apply_axis(const std::string& axis, double value, PPOConfig& ppo, nn::NetworkConfig& net) {
  const auto as_int = [&](const char* what) {
    const double r = std::round(value);
    if (r < 1.0 || r != value) throw HarnessError(std::string(what) + " must be a positive integer");
    return static_cast<int>(r);
  };
  if (axis == "learning_rate") {
    ppo.learning_rate = value;
  } else if (axis == "minibatch_size") {
    ppo.minibatch = as_int("minibatch_size");
  } else if (axis == "recurrent_units") {
    const int u = as_int("recurrent_units");
    for (auto& l : net.hidden)
      if (l.kind == nn::LayerKind::recurrent) l.units = u;
  } else if (axis == "conv_filters") {
    // Scales the conv stack; the deeper layer keeps twice the filters.
    const int f = as_int("conv_filters");
    int i = 0;
    for (auto& l : net.hidden)
      if (l.kind == nn::LayerKind::conv1d) l.units = f << std::min(i++, 1);
  } else {
    throw HarnessError("unknown sweep axis '" + axis + "'");
  }
  ppo.validate();
}

}  // namespace

SweepTable ExperimentRunner::sweep() {
  if (plan_.sweep.name.empty()) throw HarnessError("plan has no sweep axis");
  if (plan_.sweep.values.empty()) throw HarnessError("sweep axis has no values");
  const ObservationSpec obs;
  std::vector<CellJob> jobs;
  for (double value : plan_.sweep.values) {
    PPOConfig ppo = plan_.ppo;
    nn::NetworkConfig net = plan_.network.hidden.empty()
                                ? nn::NetworkConfig::desk_default(obs.window, obs.features(), 11)
                                : plan_.network;
    apply_axis(plan_.sweep.name, value, ppo, net);
    const std::string label = "ppo_" + plan_.sweep.name + "_" + format_double(value);
    for (auto preset : plan_.scenarios)
      for (auto seed : plan_.seeds)
        jobs.push_back({cell_key(label, preset, seed), [this, ppo, net, label, preset, seed] {
                          nn::NetworkConfig n = net;
                          n.actions = evaluation_scenario(plan_, preset, seed).action_levels;
                          return run_ppo(preset, seed, {}, ppo, n, label);
                        }});
  }
  const auto results = run_cached(std::move(jobs), plan_.threads, mutex_, cache_);

  SweepTable table;
  table.axis = plan_.sweep.name;
  std::size_t k = 0;
  for (double value : plan_.sweep.values) {
    std::vector<MetricReport> reports;
    for (std::size_t i = 0; i < plan_.scenarios.size() * plan_.seeds.size(); ++i, ++k) {
      reports.push_back(results[k]->report);
      table.cells.push_back(*results[k]);
    }
    table.rows.push_back({value, summarize(reports, plan_.goals)});
  }
  return table;
}

ComparisonTable run_comparison(const ExperimentPlan& plan) { return ExperimentRunner(plan).comparison(); }
AblationTable run_ablation(const ExperimentPlan& plan) { return ExperimentRunner(plan).ablation(); }
SweepTable run_sweep(const ExperimentPlan& plan) {
  plan.validate();
  if (plan.sweep.name.empty() || !known_axis(plan.sweep.name))
    throw HarnessError("unknown sweep axis '" + plan.sweep.name + "'");
  return ExperimentRunner(plan).sweep();
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string summary_header() {
  std::string h = "runs";
  for (const char* m : kMetricNames) h += std::string(",") + m + "_mean," + m + "_std";
  return h + ",success_rate";
}

std::string summary_fields(const MetricSummary& s) {
  std::string out = std::to_string(s.runs);
  for (std::size_t i = 0; i < kMetricCount; ++i) out += ',' + format_double(s.mean[i]) + ',' + format_double(s.stdev[i]);
  return out + ',' + format_double(s.success_rate);
}

constexpr std::size_t kSummaryFields = 2 + 2 * kMetricCount;

double number(const CsvRow& row, std::size_t i) {
  double v = 0.0;
  if (!parse_double(row.fields[i], v))
    throw HarnessError("line " + std::to_string(row.line) + ": field " + std::to_string(i + 1) + " is not numeric");
  return v;
}

MetricSummary parse_summary(const CsvRow& row, std::size_t at) {
  MetricSummary s;
  s.runs = static_cast<std::size_t>(number(row, at));
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    s.mean[i] = number(row, at + 1 + 2 * i);
    s.stdev[i] = number(row, at + 2 + 2 * i);
  }
  s.success_rate = number(row, at + 1 + 2 * kMetricCount);
  return s;
}

std::vector<CsvRow> table_rows(const std::string& text, const std::string& header, std::size_t fields) {
  auto rows = parse_csv_rows(text);
  if (rows.empty()) throw HarnessError("report CSV is empty");
  std::string got;
  for (std::size_t i = 0; i < rows[0].fields.size(); ++i) got += (i ? "," : "") + rows[0].fields[i];
  if (got != header) throw HarnessError("unexpected report header: " + got);
  rows.erase(rows.begin());
  for (const auto& r : rows)
    if (r.fields.size() != fields)
      throw HarnessError("line " + std::to_string(r.line) + ": expected " + std::to_string(fields) + " fields");
  return rows;
}

bool parse_flag(const CsvRow& row, std::size_t i) {
  if (row.fields[i] == "1") return true;
  if (row.fields[i] == "0") return false;
  throw HarnessError("line " + std::to_string(row.line) + ": flag must be 0 or 1");
}

const std::string kComparisonHeader = "agent,scenario," + summary_header() + ",cost_improvement_pct";
const std::string kAblationHeader =
    "variant,scenario," + summary_header() + ",cost_vs_full_pct,beats_full_cost,beats_full_reward";

}  // namespace

std::string comparison_csv(const ComparisonTable& t) {
  std::string out = kComparisonHeader + "\n";
  for (const auto& r : t.rows)
    out += csv_field(r.agent) + ',' + csv_field(r.scenario) + ',' + summary_fields(r.metrics) + ',' +
           format_double(r.cost_improvement_pct) + '\n';
  return out;
}

std::string ablation_csv(const AblationTable& t) {
  std::string out = kAblationHeader + "\n";
  for (const auto& r : t.rows)
    out += csv_field(r.variant) + ',' + csv_field(r.scenario) + ',' + summary_fields(r.metrics) + ',' +
           format_double(r.cost_vs_full_pct) + ',' + (r.beats_full_cost ? "1" : "0") + ',' +
           (r.beats_full_reward ? "1" : "0") + '\n';
  return out;
}

std::string sweep_csv(const SweepTable& t) {
  std::string out = "value," + summary_header() + "\n";
  for (const auto& r : t.rows) out += format_double(r.value) + ',' + summary_fields(r.metrics) + '\n';
  return out;
}

std::vector<ComparisonRow> comparison_rows_from_csv(const std::string& text) {
  std::vector<ComparisonRow> out;
  for (const auto& row : table_rows(text, kComparisonHeader, 3 + kSummaryFields))
    out.push_back({row.fields[0], row.fields[1], parse_summary(row, 2), number(row, 2 + kSummaryFields)});
  return out;
}

std::vector<AblationRow> ablation_rows_from_csv(const std::string& text) {
  std::vector<AblationRow> out;
  for (const auto& row : table_rows(text, kAblationHeader, 5 + kSummaryFields)) {
    AblationRow r;
    r.variant = row.fields[0];
    r.scenario = row.fields[1];
    r.metrics = parse_summary(row, 2);
    r.cost_vs_full_pct = number(row, 2 + kSummaryFields);
    r.beats_full_cost = parse_flag(row, 3 + kSummaryFields);
    r.beats_full_reward = parse_flag(row, 4 + kSummaryFields);
    out.push_back(r);
  }
  return out;
}

std::vector<SweepRow> sweep_rows_from_csv(const std::string& text) {
  std::vector<SweepRow> out;
  for (const auto& row : table_rows(text, "value," + summary_header(), 1 + kSummaryFields))
    out.push_back({number(row, 0), parse_summary(row, 1)});
  return out;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::string mean_std(const MetricSummary& m, std::size_t i, int digits) {
  return fixed(m.mean[i], digits) + " +/- " + fixed(m.stdev[i], digits);
}

}  // namespace

std::string summary_text(const ReportSet& rs) {
  std::ostringstream out;
  out << "plan " << rs.plan_label << ": " << rs.episode_days << "-day evaluation episodes, timestep "
      << format_double(rs.timestep_hours * 60.0) << " min; metrics are per episode (mean +/- sample stdev over seeds)\n";
  if (rs.comparison) {
    const auto& t = *rs.comparison;
    out << "\nComparison with the baseline system (baseline system = " << t.baseline << ")\n";
    out << pad("scenario", 10) << pad("agent", 12) << pad("energy cost ($)", 26) << pad("SLA rate", 20)
        << pad("efficiency", 20) << pad("reward", 26) << pad("CO2 (kg)", 26) << "improvement\n";
    for (const auto& r : t.rows)
      out << pad(r.scenario, 10) << pad(r.agent, 12) << pad(mean_std(r.metrics, 0, 1), 26)
          << pad(mean_std(r.metrics, 1, 4), 20) << pad(mean_std(r.metrics, 2, 4), 20)
          << pad(mean_std(r.metrics, 3, 1), 26) << pad(mean_std(r.metrics, 4, 1), 26)
          << fixed(r.cost_improvement_pct, 1) << "%\n";
  }
  if (rs.ablation) {
    const auto& t = *rs.ablation;
    out << "\nAblation study\n";
    out << pad("scenario", 10) << pad("variant", 24) << pad("energy cost ($)", 26) << pad("SLA rate", 20)
        << pad("reward", 26) << pad("cost vs full", 14) << "ordering\n";
    for (const auto& r : t.rows) {
      std::string order = "ok";
      if (r.beats_full_cost || r.beats_full_reward)
        order = std::string("beats full on") + (r.beats_full_cost ? " cost" : "") + (r.beats_full_reward ? " reward" : "");
      if (r.variant == "full") order = "-";
      out << pad(r.scenario, 10) << pad(r.variant, 24) << pad(mean_std(r.metrics, 0, 1), 26)
          << pad(mean_std(r.metrics, 1, 4), 20) << pad(mean_std(r.metrics, 3, 1), 26)
          << pad((r.cost_vs_full_pct >= 0 ? "+" : "") + fixed(r.cost_vs_full_pct, 1) + "%", 14) << order << "\n";
    }
  }
  if (rs.sweep) {
    const auto& t = *rs.sweep;
    out << "\nSweep over " << t.axis << "\n";
    out << pad("value", 14) << pad("success rate", 14) << pad("energy cost ($)", 26) << pad("SLA rate", 20)
        << "reward\n";
    for (const auto& r : t.rows)
      out << pad(format_double(r.value), 14) << pad(fixed(r.metrics.success_rate, 3), 14)
          << pad(mean_std(r.metrics, 0, 1), 26) << pad(mean_std(r.metrics, 1, 4), 20) << mean_std(r.metrics, 3, 1)
          << "\n";
  }
  return out.str();
}

std::vector<std::string> emit_report(const ReportSet& rs, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const fs::path root = fs::path(out_dir) / rs.plan_label;
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw HarnessError("cannot create " + root.string() + ": " + ec.message());

  std::vector<std::string> written;
  const auto put = [&](const fs::path& p, const std::string& content) {
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw HarnessError("cannot create " + p.parent_path().string() + ": " + ec.message());
    try {
      write_file(p.string(), content);
    } catch (const std::exception& e) {
      throw HarnessError(e.what());
    }
    written.push_back(p.string());
  };
  std::vector<std::string> cell_dirs;
  const auto put_cells = [&](const std::vector<CellResult>& cells) {
    for (const auto& c : cells) {
      const fs::path dir = root / c.agent / c.scenario / std::to_string(c.seed);
      if (std::find(cell_dirs.begin(), cell_dirs.end(), dir.string()) != cell_dirs.end()) continue;
      cell_dirs.push_back(dir.string());
      put(dir / "episode.jsonl", to_jsonl(c.log));
      if (!c.curve.empty()) put(dir / "learning_curve.csv", learning_curve_csv(c.curve));
    }
  };
  if (rs.comparison) {
    put(root / "comparison.csv", comparison_csv(*rs.comparison));
    put_cells(rs.comparison->cells);
  }
  if (rs.ablation) {
    put(root / "ablation.csv", ablation_csv(*rs.ablation));
    put_cells(rs.ablation->cells);
  }
  if (rs.sweep) {
    put(root / ("sweep_" + rs.sweep->axis + ".csv"), sweep_csv(*rs.sweep));
    put_cells(rs.sweep->cells);
  }
  put(root / "summary.txt", summary_text(rs));
  return written;
}

}  // namespace greendc
