#include "greendc/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include "greendc/metrics.hpp"
#include "greendc/traces.hpp"
#include "greendc/util.hpp"

namespace greendc {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("empty list item in '" + s + "'");
    out.push_back(item.substr(b, e - b + 1));
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

template <class T, class F>
std::string join(const std::vector<T>& items, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + fmt(items[i]);
  return out;
}

double to_real(const std::string& v) {
  double d = 0.0;
  if (!parse_double(v, d)) throw ConfigError("'" + v + "' is not a number");
  return d;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("'" + v + "' is not an unsigned 64-bit integer");
  return x;
}

int to_int(const std::string& v) {
  int x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("'" + v + "' is not an integer");
  return x;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("'" + v + "' is not a boolean (true/false)");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

Preset to_preset(const std::string& v) {
  try {
    return parse_preset(v);
  } catch (const TraceError& e) {
    throw ConfigError(e.what());
  }
}

AgentKind to_agent(const std::string& v) {
  try {
    return parse_agent(v);
  } catch (const HarnessError& e) {
    throw ConfigError(e.what());
  }
}

struct Key {
  const char* name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define REAL_KEY(name, field) \
  {name, [](const RunConfig& c) { return format_double(c.field); }, [](RunConfig& c, const std::string& v) { c.field = to_real(v); }}
#define INT_KEY(name, field) \
  {name, [](const RunConfig& c) { return std::to_string(c.field); }, [](RunConfig& c, const std::string& v) { c.field = to_int(v); }}
#define BOOL_KEY(name, field) \
  {name, [](const RunConfig& c) { return from_bool(c.field); }, [](RunConfig& c, const std::string& v) { c.field = to_bool(v); }}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"plan", [](const RunConfig& c) { return c.plan.label; },
       [](RunConfig& c, const std::string& v) { c.plan.label = v; }},
      {"preset", [](const RunConfig& c) { return preset_name(c.preset); },
       [](RunConfig& c, const std::string& v) { c.preset = to_preset(v); }},
      {"scenarios", [](const RunConfig& c) { return join(c.plan.scenarios, preset_name); },
       [](RunConfig& c, const std::string& v) {
         c.plan.scenarios.clear();
         for (const auto& s : split_list(v)) c.plan.scenarios.push_back(to_preset(s));
       }},
      {"traces", [](const RunConfig& c) { return c.traces; }, [](RunConfig& c, const std::string& v) { c.traces = v; }},
      {"agent", [](const RunConfig& c) { return agent_name(c.agent); },
       [](RunConfig& c, const std::string& v) { c.agent = to_agent(v); }},
      {"agents", [](const RunConfig& c) { return join(c.plan.agents, agent_name); },
       [](RunConfig& c, const std::string& v) {
         c.plan.agents.clear();
         for (const auto& s : split_list(v)) c.plan.agents.push_back(to_agent(s));
       }},
      {"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
       [](RunConfig& c, const std::string& v) { c.seed = to_u64(v); }},
      {"seeds", [](const RunConfig& c) { return join(c.plan.seeds, [](std::uint64_t s) { return std::to_string(s); }); },
       [](RunConfig& c, const std::string& v) {
         c.plan.seeds.clear();
         for (const auto& s : split_list(v)) c.plan.seeds.push_back(to_u64(s));
       }},
      {"out", [](const RunConfig& c) { return c.out; }, [](RunConfig& c, const std::string& v) { c.out = v; }},
      INT_KEY("days", plan.episode_days),
      REAL_KEY("timestep_hours", plan.timestep_hours),
      INT_KEY("training_weeks", plan.training_weeks),
      {"threads", [](const RunConfig& c) { return std::to_string(c.plan.threads); },
       [](RunConfig& c, const std::string& v) { c.plan.threads = static_cast<std::size_t>(to_u64(v)); }},
      REAL_KEY("gamma", plan.ppo.gamma),
      REAL_KEY("lambda", plan.ppo.lambda),
      REAL_KEY("clip", plan.ppo.clip),
      REAL_KEY("entropy_coef", plan.ppo.entropy_coef),
      REAL_KEY("value_coef", plan.ppo.value_coef),
      INT_KEY("epochs", plan.ppo.epochs),
      INT_KEY("minibatch", plan.ppo.minibatch),
      INT_KEY("rollout_length", plan.ppo.rollout_length),
      INT_KEY("updates", plan.ppo.updates),
      REAL_KEY("learning_rate", plan.ppo.learning_rate),
      REAL_KEY("max_grad_norm", plan.ppo.max_grad_norm),
      BOOL_KEY("normalize_rewards", plan.ppo.normalize_rewards),
      BOOL_KEY("anneal_learning_rate", plan.ppo.anneal_learning_rate),
      INT_KEY("select_every", plan.ppo.select_every),
      INT_KEY("q_episodes", plan.q.episodes),
      REAL_KEY("q_learning_rate", plan.q.learning_rate),
      BOOL_KEY("q_visit_count_rate", plan.q.visit_count_rate),
      REAL_KEY("q_gamma", plan.q.gamma),
      INT_KEY("q_soc_bins", plan.q.soc_bins),
      INT_KEY("q_ratio_bins", plan.q.ratio_bins),
      INT_KEY("q_price_bins", plan.q.price_bins),
      BOOL_KEY("no_reward_tuning", ablation.no_reward_tuning),
      BOOL_KEY("no_exploration", ablation.no_exploration),
      BOOL_KEY("no_energy_prediction", ablation.no_energy_prediction),
      {"sweep_axis", [](const RunConfig& c) { return c.plan.sweep.name; },
       [](RunConfig& c, const std::string& v) { c.plan.sweep.name = v; }},
      {"sweep_values", [](const RunConfig& c) { return join(c.plan.sweep.values, format_double); },
       [](RunConfig& c, const std::string& v) {
         c.plan.sweep.values.clear();
         if (v.empty()) return;
         for (const auto& s : split_list(v)) c.plan.sweep.values.push_back(to_real(s));
       }},
      REAL_KEY("min_efficiency", plan.goals.min_efficiency),
      REAL_KEY("max_sla_rate", plan.goals.max_sla_rate),
  };
  return table;
}

#undef REAL_KEY
#undef INT_KEY
#undef BOOL_KEY

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

void check(const RunConfig& c) {
  try {
    c.plan.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& k : keys()) out += std::string(k.name) + " = " + k.get(*this) + "\n";
  return out;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& k : keys()) {
    if (key != k.name) continue;
    try {
      k.set(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError("key '" + key + "': " + e.what());
    }
    return;
  }
  throw ConfigError("unknown key '" + key + "'");
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(n) + ": missing key");
    try {
      set_config_value(base, key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(n) + ": " + e.what());
    }
  }
  check(base);
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  try {
    return parse_config(text, std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Sidecar files

namespace {

const char* forecast_kind_name(ForecastKind k) {
  switch (k) {
    case ForecastKind::persistence: return "persistence";
    case ForecastKind::seasonal_naive: return "seasonal_naive";
    case ForecastKind::autoregressive: return "autoregressive";
  }
  return "?";
}

ForecastKind forecast_kind_from(const std::string& s) {
  for (auto k : {ForecastKind::persistence, ForecastKind::seasonal_naive, ForecastKind::autoregressive})
    if (s == forecast_kind_name(k)) return k;
  throw std::runtime_error("unknown forecast kind '" + s + "'");
}

}  // namespace

std::string observation_to_json(const ObservationBuilder& b) {
  const auto& f = b.forecaster();
  const auto& s = b.scales();
  json j = {{"format", "greendc.observation"},
            {"version", 1},
            {"window", b.spec().window},
            {"horizon", b.spec().horizon},
            {"scales",
             {{"demand_kw", s.demand_kw},
              {"solar_kw", s.solar_kw},
              {"wind_kw", s.wind_kw},
              {"renewable_kw", s.renewable_kw},
              {"price_per_kwh", s.price_per_kwh}}},
            {"forecaster",
             {{"kind", forecast_kind_name(f.kind)},
              {"order", f.order},
              {"period", f.period},
              {"coefficients", f.coefficients},
              {"bias", f.bias},
              {"fell_back", f.fell_back}}},
            {"zero_forecast", b.zero_forecast()}};
  return j.dump(1) + "\n";
}

ObservationBuilder observation_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "greendc.observation" || j.at("version") != 1)
      throw std::runtime_error("not a version-1 observation file");
    ObservationSpec spec;
    spec.window = j.at("window").get<int>();
    spec.horizon = j.at("horizon").get<int>();
    const auto& js = j.at("scales");
    ObservationScales s;
    s.demand_kw = js.at("demand_kw").get<double>();
    s.solar_kw = js.at("solar_kw").get<double>();
    s.wind_kw = js.at("wind_kw").get<double>();
    s.renewable_kw = js.at("renewable_kw").get<double>();
    s.price_per_kwh = js.at("price_per_kwh").get<double>();
    const auto& jf = j.at("forecaster");
    ForecastModel f;
    f.kind = forecast_kind_from(jf.at("kind").get<std::string>());
    f.order = jf.at("order").get<std::size_t>();
    f.period = jf.at("period").get<std::size_t>();
    f.coefficients = jf.at("coefficients").get<std::vector<double>>();
    f.bias = jf.at("bias").get<double>();
    f.fell_back = jf.at("fell_back").get<bool>();
    return ObservationBuilder(spec, s, f, j.at("zero_forecast").get<bool>());
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("observation file: ") + e.what());
  }
}

std::string qtable_to_json(const QTable& t) {
  json j = {{"format", "greendc.qtable"}, {"version", 1},           {"soc_bins", t.soc_bins},
            {"ratio_bins", t.ratio_bins}, {"price_bins", t.price_bins}, {"actions", t.actions},
            {"price_edges", t.price_edges}, {"q", t.q}};
  return j.dump() + "\n";
}

QTable qtable_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "greendc.qtable" || j.at("version") != 1)
      throw std::runtime_error("not a version-1 Q-table file");
    QTable t;
    t.soc_bins = j.at("soc_bins").get<int>();
    t.ratio_bins = j.at("ratio_bins").get<int>();
    t.price_bins = j.at("price_bins").get<int>();
    t.actions = j.at("actions").get<int>();
    t.price_edges = j.at("price_edges").get<std::vector<double>>();
    t.q = j.at("q").get<std::vector<double>>();
    if (t.soc_bins < 1 || t.ratio_bins < 1 || t.price_bins < 1 || t.actions < 1 ||
        t.q.size() != t.states() * static_cast<std::size_t>(t.actions) ||
        t.price_edges.size() + 1 != static_cast<std::size_t>(t.price_bins))
      throw std::runtime_error("Q-table dimensions do not match its values");
    return t;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("Q-table file: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Commands

namespace {

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> preset, traces, agent, input, output, policy, axis, values;
  std::optional<int> days, updates;
  std::optional<double> timestep;
  std::optional<std::size_t> threads;
  std::size_t coords = 100;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());
  return fs::path(dir);
}

void echo_config(const RunConfig& c, const fs::path& dir) {
  write_file((dir / "config.txt").string(), c.to_text());
}

Scenario scenario_from_traces(const std::string& path, double dt) {
  const auto raw = load_csv(path);
  const auto cleaned = clean(raw);
  const auto grid = aggregate(cleaned, dt);
  Scenario sc;
  sc.label = fs::path(path).stem().string();
  sc.series = records_to_series(grid, dt);
  sc.validate();
  return sc;
}

std::vector<Scenario> training_set(const RunConfig& c) {
  if (!c.traces.empty()) return {scenario_from_traces(c.traces, c.plan.timestep_hours)};
  return training_scenarios(c.plan, c.preset, c.seed);
}

Scenario evaluation_set(const RunConfig& c) {
  if (!c.traces.empty()) return scenario_from_traces(c.traces, c.plan.timestep_hours);
  return evaluation_scenario(c.plan, c.preset, c.seed);
}

int cmd_gen_traces(const RunConfig& c, const Flags& f, std::ostream& out) {
  const auto series = synthesize(c.preset, c.plan.episode_days, c.seed, c.plan.timestep_hours);
  const auto records = series_to_records(series);
  const fs::path dir = prepare_dir(c.out);
  const std::string path = f.output ? *f.output : (dir / "traces.csv").string();
  save_csv(records, path);
  echo_config(c, dir);
  out << "wrote " << records.size() << " records to " << path << "\n";
  return 0;
}

int cmd_preprocess(const RunConfig& c, const Flags& f, std::ostream& out) {
  if (!f.input) throw UsageError("preprocess needs --input <trace.csv>");
  const auto raw = load_csv(*f.input);
  const auto data = preprocess(raw, c.plan.timestep_hours);
  const fs::path dir = prepare_dir(c.out);
  const std::string path = f.output ? *f.output : (dir / "unified.csv").string();
  write_file(path, unified_to_csv(data));
  echo_config(c, dir);
  out << "wrote " << data.records.size() << " unified records to " << path << "\n";
  return 0;
}

int cmd_train(const RunConfig& c, std::ostream& out) {
  const auto training = training_set(c);
  const fs::path dir = prepare_dir(c.out);
  if (c.agent == AgentKind::ppo) {
    const auto result = train(training, c.plan.ppo, c.ablation, c.seed, c.plan.network);
    nn::save_checkpoint((dir / "policy.json").string(), result.policy.network, result.policy.params);
    write_file((dir / "observation.json").string(), observation_to_json(result.policy.observations));
    write_file((dir / "learning_curve.csv").string(), learning_curve_csv(result.curve));
    out << "trained ppo for " << c.plan.ppo.updates << " updates (" << result.episode_rewards.size()
        << " episodes), kept update " << result.selected_update << "\n";
  } else if (c.agent == AgentKind::tabular_q) {
    const QTable table = tabular_q_train(training, c.plan.q, c.seed);
    write_file((dir / "q_table.json").string(), qtable_to_json(table));
    out << "trained tabular_q for " << c.plan.q.episodes << " episodes\n";
  } else {
    throw UsageError(agent_name(c.agent) + " has nothing to train");
  }
  echo_config(c, dir);
  return 0;
}

int cmd_evaluate(const RunConfig& c, const Flags& f, std::ostream& out) {
  const Scenario eval = evaluation_set(c);
  Controller controller;
  PpoPolicy policy;
  QTable table;
  if (c.agent == AgentKind::ppo || c.agent == AgentKind::tabular_q) {
    if (!f.policy) throw UsageError("evaluating " + agent_name(c.agent) + " needs --policy <train output dir>");
    const fs::path p(*f.policy);
    if (c.agent == AgentKind::ppo) {
      nn::load_checkpoint((p / "policy.json").string(), policy.network, policy.params);
      policy.observations = observation_from_json(read_file((p / "observation.json").string()));
      controller = ppo_controller(policy, eval);
    } else {
      table = qtable_from_json(read_file((p / "q_table.json").string()));
      controller = tabular_q_controller(table, eval);
    }
  } else if (c.agent == AgentKind::rule_based) {
    controller = rule_based_controller(eval);
  } else {
    controller = heuristic_controller(eval, fit_renewable_forecaster(training_set(c)));
  }
  const auto run = run_episode(eval, controller, c.seed);
  const MetricReport report = evaluate(run.log, c.plan.goals);
  const fs::path dir = prepare_dir(c.out);
  save_jsonl(run.log, (dir / "episode.jsonl").string());
  write_file((dir / "metrics.csv").string(), std::string(kMetricColumns) + "\n" + to_csv_row(report) + "\n");
  echo_config(c, dir);
  out << kMetricColumns << "\n" << to_csv_row(report) << "\n";
  return 0;
}

int cmd_plan(const std::string& which, const RunConfig& c, std::ostream& out) {
  ExperimentRunner runner(c.plan);
  ReportSet rs;
  rs.plan_label = c.plan.label;
  rs.episode_days = c.plan.episode_days;
  rs.timestep_hours = c.plan.timestep_hours;
  if (which == "compare") rs.comparison = runner.comparison();
  if (which == "ablate") rs.ablation = runner.ablation();
  if (which == "sweep") rs.sweep = runner.sweep();
  const auto files = emit_report(rs, c.out);
  echo_config(c, prepare_dir((fs::path(c.out) / c.plan.label).string()));
  out << summary_text(rs) << "\nwrote " << files.size() << " files under " << (fs::path(c.out) / c.plan.label).string()
      << "\n";
  return 0;
}

int cmd_grad_check(const RunConfig& c, const Flags& f, std::ostream& out) {
  const ObservationSpec spec;
  bool ok = true;
  const auto report = [&](const char* net, const nn::NetworkConfig& cfg, double tol) {
    const auto r = nn::grad_check(cfg, c.seed, f.coords);
    for (const auto& g : r.groups) {
      const bool pass = g.max_rel_error < tol;
      ok = ok && pass;
      char buf[160];
      std::snprintf(buf, sizeof buf, "%-10s %-10s coords %3zu  max rel error %.3e  (< %.0e) %s\n", net,
                    g.group.c_str(), g.coordinates, g.max_rel_error, tol, pass ? "PASS" : "FAIL");
      out << buf;
    }
  };
  report("default", nn::NetworkConfig::desk_default(spec.window, spec.features(), 11), 1e-3);
  report("dense", nn::NetworkConfig::dense_only(spec.window, spec.features(), 11), 1e-6);
  return ok ? 0 : 2;
}

}  // namespace

int dispatch_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Battery dispatch experiments for a renewable-powered data center", "greendc"};
  app.require_subcommand(1);
  Flags f;
  std::uint64_t seed = 0;
  std::string out_dir;
  app.add_option("--config", f.config_path, "key = value run configuration file");
  auto* seed_opt = app.add_option("--seed", seed, "random seed (unsigned 64-bit)");
  auto* out_opt = app.add_option("--out", out_dir, "output directory");
  app.fallthrough();

  const auto scenario_opts = [&](CLI::App* s) {
    s->add_option_function<std::string>("--preset", [&](const std::string& v) { f.preset = v; }, "high, low or mixed");
    s->add_option_function<int>("--days", [&](int v) { f.days = v; }, "episode length in days");
    s->add_option_function<double>("--timestep", [&](double v) { f.timestep = v; }, "timestep in hours");
  };
  auto* gen = app.add_subcommand("gen-traces", "synthesize a trace CSV");
  scenario_opts(gen);
  gen->add_option_function<std::string>("--output", [&](const std::string& v) { f.output = v; }, "CSV path");
  auto* pre = app.add_subcommand("preprocess", "clean, aggregate and normalize a trace CSV");
  pre->add_option_function<std::string>("--input", [&](const std::string& v) { f.input = v; }, "trace CSV")
      ->required();
  pre->add_option_function<double>("--timestep", [&](double v) { f.timestep = v; }, "timestep in hours");
  pre->add_option_function<std::string>("--output", [&](const std::string& v) { f.output = v; }, "CSV path");
  auto* tr = app.add_subcommand("train", "train a ppo or tabular_q agent");
  auto* ev = app.add_subcommand("evaluate", "run one greedy evaluation episode");
  for (auto* s : {tr, ev}) {
    scenario_opts(s);
    s->add_option_function<std::string>("--traces", [&](const std::string& v) { f.traces = v; }, "trace CSV");
    s->add_option_function<std::string>("--agent", [&](const std::string& v) { f.agent = v; },
                                        "ppo, rule_based, heuristic or tabular_q");
  }
  tr->add_option_function<int>("--updates", [&](int v) { f.updates = v; }, "PPO updates");
  ev->add_option_function<std::string>("--policy", [&](const std::string& v) { f.policy = v; },
                                       "directory written by train");
  auto* cmp = app.add_subcommand("compare", "agent x scenario comparison table");
  auto* abl = app.add_subcommand("ablate", "ablation table");
  auto* swp = app.add_subcommand("sweep", "one-parameter sweep");
  for (auto* s : {cmp, abl, swp}) {
    s->add_option_function<int>("--updates", [&](int v) { f.updates = v; }, "PPO updates");
    s->add_option_function<std::size_t>("--threads", [&](std::size_t v) { f.threads = v; }, "worker threads");
  }
  swp->add_option_function<std::string>("--axis", [&](const std::string& v) { f.axis = v; },
                                        "recurrent_units, conv_filters, minibatch_size or learning_rate");
  swp->add_option_function<std::string>("--values", [&](const std::string& v) { f.values = v; },
                                        "comma-separated values");
  auto* gc = app.add_subcommand("grad-check", "finite-difference gradient check");
  gc->add_option("--coords", f.coords, "coordinates per layer type");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return 1;
  }
  if (*seed_opt) f.seed = seed;
  if (*out_opt) f.out = out_dir;

  RunConfig config;
  try {
    if (!f.config_path.empty()) config = load_config(f.config_path);
    const auto set = [&](const char* key, const std::optional<std::string>& v) {
      if (v) set_config_value(config, key, *v);
    };
    set("preset", f.preset);
    set("traces", f.traces);
    set("agent", f.agent);
    set("sweep_axis", f.axis);
    set("sweep_values", f.values);
    if (f.out) config.out = *f.out;
    if (f.days) config.plan.episode_days = *f.days;
    if (f.timestep) config.plan.timestep_hours = *f.timestep;
    if (f.updates) config.plan.ppo.updates = *f.updates;
    if (f.threads) config.plan.threads = *f.threads;
    if (f.seed) {
      // An explicit seed also pins plan commands to that single seed.
      config.seed = *f.seed;
      config.plan.seeds = {*f.seed};
    }
    check(config);
    if (f.coords < 1) throw ConfigError("--coords must be >= 1");
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "gen-traces") return cmd_gen_traces(config, f, out);
    if (name == "preprocess") return cmd_preprocess(config, f, out);
    if (name == "train") return cmd_train(config, out);
    if (name == "evaluate") return cmd_evaluate(config, f, out);
    if (name == "compare" || name == "ablate" || name == "sweep") {
      if (name == "sweep" && config.plan.sweep.name.empty()) throw UsageError("sweep needs --axis and --values");
      return cmd_plan(name, config, out);
    }
    if (name == "grad-check") return cmd_grad_check(config, f, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  err << app.help();
  return 1;
}

}  // namespace greendc
