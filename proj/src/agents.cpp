#include "greendc/agents.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <sstream>

namespace greendc {

std::string ablation_label(const AblationFlags& f) {
  std::string out;
  auto add = [&](const char* name) {
    if (!out.empty()) out += '+';
    out += name;
  };
  if (f.no_reward_tuning) add("no_reward_tuning");
  if (f.no_exploration) add("no_exploration");
  if (f.no_energy_prediction) add("no_energy_prediction");
  return out.empty() ? "full" : out;
}

RewardWeights training_weights(const RewardWeights& tuned, const AblationFlags& flags) {
  if (!flags.no_reward_tuning) return tuned;
  return RewardWeights{1.0, 1.0, 0.0};
}

// ---------------------------------------------------------------------------
// Observations

ObservationScales fit_scales(std::span<const Scenario> scenarios) {
  if (scenarios.empty()) throw AgentError("fit_scales: no scenarios");
  ObservationScales s{1e-9, 1e-9, 1e-9, 1e-9, 1e-9};
  for (const auto& sc : scenarios) {
    const auto& x = sc.series;
    for (std::size_t t = 0; t < x.size(); ++t) {
      s.demand_kw = std::max(s.demand_kw, x.demand_kw[t]);
      s.solar_kw = std::max(s.solar_kw, x.solar_kw[t]);
      s.wind_kw = std::max(s.wind_kw, x.wind_kw[t]);
      s.renewable_kw = std::max(s.renewable_kw, renewable_at(x, t));
      s.price_per_kwh = std::max(s.price_per_kwh, x.grid_price_per_kwh[t]);
    }
  }
  return s;
}

ForecastModel fit_renewable_forecaster(std::span<const Scenario> scenarios) {
  std::vector<double> all;
  for (const auto& sc : scenarios)
    for (std::size_t t = 0; t < sc.series.size(); ++t) all.push_back(renewable_at(sc.series, t));
  return fit_forecast(ForecastKind::autoregressive, all, 4);
}

ObservationBuilder::ObservationBuilder(ObservationSpec spec, ObservationScales scales, ForecastModel forecaster,
                                       bool zero_forecast)
    : spec_(spec), scales_(scales), forecaster_(std::move(forecaster)), zero_forecast_(zero_forecast) {
  if (spec_.window < 1 || spec_.horizon < 0) throw AgentError("observation window must be >= 1");
}

namespace {

double unit(double x, double scale) { return std::clamp(x / scale, 0.0, 1.0); }

}  // namespace

ObservationContext ObservationBuilder::context(const Scenario& scenario) const {
  const auto& x = scenario.series;
  const std::size_t T = x.size();
  const auto H = static_cast<std::size_t>(spec_.horizon);
  ObservationContext ctx;
  ctx.step_rows.resize(T * kStepFeatures);
  ctx.forecasts.assign(T * H, 0.0);
  std::vector<double> renewable(T);
  for (std::size_t t = 0; t < T; ++t) renewable[t] = renewable_at(x, t);
  const std::size_t need = forecaster_.required_history();
  for (std::size_t t = 0; t < T; ++t) {
    double* row = ctx.step_rows.data() + t * kStepFeatures;
    const double hour = std::fmod(static_cast<double>(t) * x.timestep_hours, 24.0);
    const double angle = 2.0 * std::numbers::pi * hour / 24.0;
    row[0] = unit(x.demand_kw[t], scales_.demand_kw);
    row[1] = unit(x.solar_kw[t], scales_.solar_kw);
    row[2] = unit(x.wind_kw[t], scales_.wind_kw);
    row[3] = unit(x.grid_price_per_kwh[t], scales_.price_per_kwh);
    row[4] = std::sin(angle);
    row[5] = std::cos(angle);
    if (zero_forecast_ || H == 0 || t + 1 < need) continue;
    const auto hist = std::span<const double>(renewable).subspan(t + 1 - need, need);
    const auto pred = predict(forecaster_, hist, H);
    for (std::size_t h = 0; h < H; ++h) ctx.forecasts[t * H + h] = unit(pred[h], scales_.renewable_kw);
  }
  return ctx;
}

void ObservationBuilder::build(const ObservationContext& ctx, const Scenario& scenario, const EnvState& state,
                               std::span<double> out) const {
  if (out.size() != size()) throw AgentError("observation buffer has the wrong size");
  const std::size_t T = ctx.step_rows.size() / kStepFeatures;
  if (state.t >= T) throw AgentError("observation requested past the horizon");
  const auto W = static_cast<std::size_t>(spec_.window);
  const auto H = static_cast<std::size_t>(spec_.horizon);
  const auto F = static_cast<std::size_t>(spec_.features());
  const auto& b = scenario.battery;
  const double soc = std::clamp((state.soc_kwh - b.soc_min_kwh) / b.range_kwh(), 0.0, 1.0);
  const double* fc = ctx.forecasts.data() + state.t * H;
  for (std::size_t r = 0; r < W; ++r) {
    double* row = out.data() + r * F;
    const std::ptrdiff_t tau = static_cast<std::ptrdiff_t>(state.t + r + 1) - static_cast<std::ptrdiff_t>(W);
    if (tau < 0) {
      std::fill(row, row + F, 0.0);
      continue;
    }
    const double* src = ctx.step_rows.data() + static_cast<std::size_t>(tau) * kStepFeatures;
    std::copy(src, src + kStepFeatures, row);
    row[kStepFeatures] = soc;
    std::copy(fc, fc + H, row + kStepFeatures + 1);
  }
}

ObservationBuilder make_observation_builder(std::span<const Scenario> training, const AblationFlags& flags,
                                            ObservationSpec spec) {
  return ObservationBuilder(spec, fit_scales(training), fit_renewable_forecaster(training),
                            flags.no_energy_prediction);
}

std::vector<double> build_observation(const EnvState& state, const Scenario& scenario,
                                      const ObservationBuilder& builder) {
  std::vector<double> out(builder.size());
  builder.build(builder.context(scenario), scenario, state, out);
  return out;
}

// ---------------------------------------------------------------------------
// Policy evaluation

int sample_index(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  // Rounding left u above the total; take the last action with mass.
  for (std::size_t k = probs.size(); k-- > 0;)
    if (probs[k] > 0.0) return static_cast<int>(k);
  return 0;
}

int greedy_index(std::span<const double> probs) {
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

ActResult act(const nn::Network& net, std::span<const double> params, std::span<const double> observation,
              ActMode mode, Rng& rng, nn::ForwardCache& cache) {
  const auto& out = net.forward(params, observation, cache);
  const int a = mode == ActMode::greedy ? greedy_index(out.probs) : sample_index(out.probs, rng);
  return ActResult{Action{a}, std::log(out.probs[static_cast<std::size_t>(a)]), out.value};
}

// ---------------------------------------------------------------------------
// PPO

void PPOConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw AgentError("gamma must be in (0, 1]");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw AgentError("lambda must be in (0, 1]");
  if (!(clip > 0.0 && clip <= 0.5)) throw AgentError("clip must be in (0, 0.5]");
  if (entropy_coef < 0.0 || value_coef < 0.0) throw AgentError("loss coefficients must be >= 0");
  if (epochs < 1 || minibatch < 1 || rollout_length < 1) throw AgentError("PPO sizes must be positive");
  if (updates < 0) throw AgentError("update count must be >= 0");
  if (!(learning_rate > 0.0)) throw AgentError("learning rate must be positive");
  if (!(max_grad_norm > 0.0)) throw AgentError("max_grad_norm must be positive");
  if (select_every < 0) throw AgentError("select_every must be >= 0");
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double bootstrap, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n)
    throw AgentError("compute_gae: rewards, values and dones differ in length");
  GaeResult g;
  g.advantages.assign(n, 0.0);
  g.returns.assign(n, 0.0);
  double next_adv = 0.0;
  double next_value = bootstrap;
  for (std::size_t i = n; i-- > 0;) {
    const double live = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * next_value * live - values[i];
    next_adv = delta + gamma * lambda * live * next_adv;
    g.advantages[i] = next_adv;
    g.returns[i] = next_adv + values[i];
    next_value = values[i];
  }
  return g;
}

void RolloutBuffer::clear() {
  observations.clear();
  actions.clear();
  log_probs.clear();
  rewards.clear();
  values.clear();
  dones.clear();
  advantages.clear();
  returns.clear();
}

void RolloutBuffer::add(std::span<const double> observation, int action, double log_prob, double reward,
                        double value, bool done) {
  if (observation.size() != obs_size) throw AgentError("rollout observation has the wrong size");
  observations.insert(observations.end(), observation.begin(), observation.end());
  actions.push_back(action);
  log_probs.push_back(log_prob);
  rewards.push_back(reward);
  values.push_back(value);
  dones.push_back(done ? 1 : 0);
  advantages.clear();
  returns.clear();
}

void RolloutBuffer::finish(double bootstrap, double gamma, double lambda) {
  auto g = compute_gae(rewards, values, dones, bootstrap, gamma, lambda);
  advantages = std::move(g.advantages);
  returns = std::move(g.returns);
}

std::span<const double> RolloutBuffer::observation(std::size_t i) const {
  return std::span<const double>(observations).subspan(i * obs_size, obs_size);
}

PPODiagnostics ppo_update(const nn::Network& net, nn::ParameterSet& params, const RolloutBuffer& buffer,
                          const PPOConfig& config, Rng& rng) {
  config.validate();
  if (!buffer.ready()) throw AgentError("ppo_update: advantages not computed");
  PPODiagnostics d;
  const std::size_t n = buffer.size();
  if (n == 0) return d;
  const auto K = static_cast<std::size_t>(net.config().actions);
  const nn::ParameterSet backup = params;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(net.parameter_count()), dlogits(K), adv;
  nn::ForwardCache cache;
  const nn::AdamConfig adam{config.learning_rate};
  const auto mb = static_cast<std::size_t>(config.minibatch);
  std::size_t clipped = 0, samples = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t end = std::min(n, start + mb);
      const auto B = static_cast<double>(end - start);
      adv.clear();
      for (std::size_t j = start; j < end; ++j) adv.push_back(buffer.advantages[order[j]]);
      const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / B;
      double var = 0.0;
      for (double a : adv) var += (a - mean) * (a - mean);
      const double sd = std::sqrt(var / B);
      for (double& a : adv) a = sd > 1e-8 ? (a - mean) / sd : a - mean;

      std::fill(grad.begin(), grad.end(), 0.0);
      double policy_loss = 0.0, value_loss = 0.0, entropy = 0.0;
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t i = order[j];
        const auto& out = net.forward(params.values, buffer.observation(i), cache);
        const auto a = static_cast<std::size_t>(buffer.actions[i]);
        const double A = adv[j - start];
        const double ratio = std::exp(std::log(out.probs[a]) - buffer.log_probs[i]);
        const double lo = 1.0 - config.clip, hi = 1.0 + config.clip;
        const double surr1 = ratio * A;
        const double surr2 = std::clamp(ratio, lo, hi) * A;
        const bool unclipped = surr1 <= surr2;
        if (ratio < lo || ratio > hi) ++clipped;
        ++samples;
        double h = 0.0;
        for (double p : out.probs)
          if (p > 0.0) h -= p * std::log(p);
        const double verr = out.value - buffer.returns[i];
        policy_loss -= std::min(surr1, surr2);
        value_loss += verr * verr;
        entropy += h;

        // d/dz of [-surrogate - c_e * H] / B
        const double pg = unclipped ? A * ratio : 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          const double p = out.probs[k];
          const double onehot = k == a ? 1.0 : 0.0;
          const double dent = p > 0.0 ? -p * (std::log(p) + h) : 0.0;
          dlogits[k] = (-pg * (onehot - p) - config.entropy_coef * dent) / B;
        }
        net.backward(params.values, cache, dlogits, 2.0 * config.value_coef * verr / B, grad);
      }
      policy_loss /= B;
      value_loss /= B;
      entropy /= B;
      const double loss = policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy;
      if (!std::isfinite(loss)) {
        params = backup;
        d.aborted = true;
        return d;
      }
      double norm = 0.0;
      for (double g : grad) norm += g * g;
      norm = std::sqrt(norm);
      if (std::isfinite(norm) && norm > config.max_grad_norm)
        for (double& g : grad) g *= config.max_grad_norm / norm;
      if (!nn::adam_step(params, grad, adam)) ++d.skipped_steps;
      d.policy_loss += policy_loss;
      d.value_loss += value_loss;
      d.entropy += entropy;
      ++d.minibatches;
    }
  }
  const auto m = static_cast<double>(d.minibatches);
  d.policy_loss /= m;
  d.value_loss /= m;
  d.entropy /= m;
  d.clip_fraction = static_cast<double>(clipped) / static_cast<double>(samples);
  return d;
}

namespace {

// Scales rewards by the running standard deviation of the discounted return.
class RewardScaler {
 public:
  RewardScaler(double gamma, bool enabled) : gamma_(gamma), enabled_(enabled) {}

  double operator()(double reward, bool done) {
    if (!enabled_) return reward;
    ret_ = ret_ * gamma_ + reward;
    ++count_;
    const double delta = ret_ - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (ret_ - mean_);
    if (done) ret_ = 0.0;
    const double var = count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0;
    return var > 1e-12 ? reward / std::sqrt(var) : reward;
  }

 private:
  double gamma_;
  bool enabled_;
  double ret_ = 0.0, mean_ = 0.0, m2_ = 0.0;
  std::size_t count_ = 0;
};

}  // namespace

TrainResult train(std::span<const Scenario> scenarios, const PPOConfig& config, const AblationFlags& flags,
                  std::uint64_t seed, nn::NetworkConfig network, ObservationSpec spec,
                  const TrainObserver& on_update) {
  config.validate();
  if (scenarios.empty()) throw AgentError("train: no scenarios");
  const int K = scenarios.front().action_levels;
  for (const auto& s : scenarios) {
    s.validate();
    if (s.action_levels != K) throw AgentError("train: scenarios disagree on the action count");
  }

  TrainResult result;
  auto& policy = result.policy;
  policy.observations = make_observation_builder(scenarios, flags, spec);
  if (network.hidden.empty()) network = nn::NetworkConfig::desk_default(spec.window, spec.features(), K);
  if (network.window != spec.window || network.features != spec.features() || network.actions != K)
    throw AgentError("train: network input/output shape does not match the observation spec");
  policy.network = network;
  const nn::Network net(network);
  policy.params = net.initialize(mix_seed(seed, 1));

  std::vector<Scenario> envs(scenarios.begin(), scenarios.end());
  std::vector<ObservationContext> contexts;
  for (auto& s : envs) {
    s.weights = training_weights(s.weights, flags);
    contexts.push_back(policy.observations.context(s));
  }

  PPOConfig cfg = config;
  if (flags.no_exploration) cfg.entropy_coef = 0.0;
  const ActMode mode = flags.no_exploration ? ActMode::greedy : ActMode::sample;
  Rng act_rng(mix_seed(seed, 2));
  Rng update_rng(mix_seed(seed, 3));
  RewardScaler scaler(cfg.gamma, cfg.normalize_rewards);

  RolloutBuffer buffer(policy.observations.size());
  std::vector<double> obs(policy.observations.size());
  nn::ForwardCache cache;
  std::size_t env = 0;
  EnvState state = reset(envs[env], mix_seed(seed, 4));
  double ep_reward = 0.0, ep_cost = 0.0;
  std::size_t ep_sla = 0;

  // Greedy training-set score used for parameter selection.
  auto score = [&](const nn::ParameterSet& ps) {
    double total = 0.0;
    for (std::size_t i = 0; i < envs.size(); ++i) {
      EnvState s = reset(envs[i], mix_seed(seed, 4));
      while (!s.done) {
        policy.observations.build(contexts[i], envs[i], s, obs);
        const auto a = act(net, ps.values, obs, ActMode::greedy, act_rng, cache);
        const auto tr = step(envs[i], s, a.action);
        total += tr.outcome.reward;
        s = tr.next;
      }
    }
    return total;
  };
  nn::ParameterSet best;
  double best_score = 0.0;
  if (cfg.select_every > 0 && cfg.updates > 0) {
    best = policy.params;
    best_score = score(best);
  }

  for (int u = 0; u < cfg.updates; ++u) {
    buffer.clear();
    if (cfg.anneal_learning_rate)
      cfg.learning_rate = config.learning_rate * (1.0 - static_cast<double>(u) / cfg.updates);
    double sum_reward = 0.0, sum_cost = 0.0;
    std::size_t sum_sla = 0, sum_steps = 0, finished = 0;
    for (int i = 0; i < cfg.rollout_length; ++i) {
      policy.observations.build(contexts[env], envs[env], state, obs);
      const auto a = act(net, policy.params.values, obs, mode, act_rng, cache);
      const auto tr = step(envs[env], state, a.action);
      ep_reward += tr.outcome.reward;
      ep_cost += tr.outcome.energy_cost;
      ep_sla += tr.outcome.sla_violated ? 1 : 0;
      const bool done = tr.next.done;
      buffer.add(obs, a.action.index, a.log_prob, scaler(tr.outcome.reward, done), a.value, done);
      if (done) {
        result.episode_rewards.push_back(ep_reward);
        sum_reward += ep_reward;
        sum_cost += ep_cost;
        sum_sla += ep_sla;
        sum_steps += envs[env].horizon();
        ++finished;
        ep_reward = ep_cost = 0.0;
        ep_sla = 0;
        env = (env + 1) % envs.size();
        state = reset(envs[env], mix_seed(seed, 4));
      } else {
        state = tr.next;
      }
    }
    double bootstrap = 0.0;
    if (!buffer.dones.back()) {
      policy.observations.build(contexts[env], envs[env], state, obs);
      bootstrap = net.forward(policy.params.values, obs, cache).value;
    }
    buffer.finish(bootstrap, cfg.gamma, cfg.lambda);
    const auto diag = ppo_update(net, policy.params, buffer, cfg, update_rng);
    if (on_update) on_update(u, policy, diag);
    if (cfg.select_every > 0 && ((u + 1) % cfg.select_every == 0 || u + 1 == cfg.updates)) {
      const double sc = score(policy.params);
      if (sc > best_score) {
        best_score = sc;
        best = policy.params;
        result.selected_update = u;
      }
    }
    if (finished > 0) {
      const auto f = static_cast<double>(finished);
      result.curve.push_back({u, result.episode_rewards.size(), sum_reward / f, sum_cost / f,
                              static_cast<double>(sum_sla) / static_cast<double>(sum_steps)});
    }
  }
  if (cfg.select_every > 0 && cfg.updates > 0) policy.params = std::move(best);
  else if (cfg.updates > 0) result.selected_update = cfg.updates - 1;
  return result;
}

std::string learning_curve_csv(const std::vector<LearningCurvePoint>& curve) {
  std::string out = "update_index,episodes,mean_cumulative_reward,mean_cost,sla_rate\n";
  for (const auto& p : curve) {
    out += std::to_string(p.update_index) + ',' + std::to_string(p.episodes) + ',' +
           format_double(p.mean_cumulative_reward) + ',' + format_double(p.mean_cost) + ',' +
           format_double(p.sla_rate) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Baselines

Action rule_based_act(const EnvState& state, const Scenario& scenario) {
  const auto& x = scenario.series;
  const auto& b = scenario.battery;
  const int K = scenario.action_levels;
  const double net = renewable_at(x, state.t) - x.demand_kw[state.t];
  if (net > 0.0) return max_charge_action(K);
  if (net < 0.0 && state.soc_kwh > b.soc_min_kwh + 0.25 * b.range_kwh()) return max_discharge_action(K);
  return idle_action(K);
}

namespace {

double mean_price(const ExogenousSeries& x) {
  return std::accumulate(x.grid_price_per_kwh.begin(), x.grid_price_per_kwh.end(), 0.0) /
         static_cast<double>(x.size());
}

// Forecast of renewable power at t from the values strictly before t.
double one_step_forecast(const ExogenousSeries& x, std::size_t t, const ForecastModel& f) {
  const std::size_t need = f.required_history();
  if (t >= need) {
    std::vector<double> hist(need);
    for (std::size_t i = 0; i < need; ++i) hist[i] = renewable_at(x, t - need + i);
    return predict(f, hist, 1).front();
  }
  return t > 0 ? renewable_at(x, t - 1) : 0.0;
}

Action heuristic_choice(const EnvState& state, const Scenario& scenario, double renewable_kw, double avg_price) {
  const auto& w = scenario.weights;
  const auto& b = scenario.battery;
  StepConditions c = conditions_at(scenario.series, state.t);
  c.renewable_kw = renewable_kw;
  const double credit = w.alpha * b.discharge_eff * std::max(avg_price - c.storage_price_per_kwh, 0.0) +
                        w.beta * c.emission_factor_kg_per_kwh * b.discharge_eff;
  const int K = scenario.action_levels;
  const int idle = idle_action(K).index;
  int best = idle;
  double best_cost = 0.0;
  // Visit actions by distance from idle so exact ties keep the gentler setpoint.
  for (int dist = 0; dist <= K; ++dist) {
    for (int a : {idle - dist, idle + dist}) {
      if (a < 0 || a >= K || (dist == 0 && a != idle) || (dist > 0 && a == idle)) continue;
      double soc = state.soc_kwh;
      const auto o = dispatch(scenario, c, soc, Action{a});
      const double cost = w.alpha * o.energy_cost + w.beta * o.emissions_kg + w.sla_penalty * o.unserved_kwh -
                          credit * (soc - state.soc_kwh);
      if ((a == idle) || cost < best_cost - 1e-12 * std::max(1.0, std::abs(best_cost))) {
        best = a;
        best_cost = cost;
      }
      if (dist == 0) break;
    }
  }
  return Action{best};
}

}  // namespace

Action heuristic_act(const EnvState& state, const Scenario& scenario, const ForecastModel& forecaster) {
  return heuristic_choice(state, scenario, one_step_forecast(scenario.series, state.t, forecaster),
                          mean_price(scenario.series));
}

void QConfig::validate() const {
  if (soc_bins < 2 || ratio_bins < 2 || price_bins < 2) throw AgentError("Q bins must be >= 2 per dimension");
  if (episodes < 0) throw AgentError("Q episode count must be >= 0");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw AgentError("Q learning rate must be in (0, 1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw AgentError("Q gamma must be in [0, 1]");
}

std::size_t QTable::state_index(const Scenario& scenario, const EnvState& state) const {
  const auto& x = scenario.series;
  const auto& b = scenario.battery;
  auto bin = [](double frac, int bins) {
    return static_cast<std::size_t>(std::clamp(static_cast<int>(std::floor(frac * bins)), 0, bins - 1));
  };
  const double soc = (state.soc_kwh - b.soc_min_kwh) / b.range_kwh();
  const double demand = x.demand_kw[state.t];
  const double ratio = demand > 0.0 ? renewable_at(x, state.t) / demand : 2.0;
  const double price = x.grid_price_per_kwh[state.t];
  const auto p = static_cast<std::size_t>(
      std::upper_bound(price_edges.begin(), price_edges.end(), price) - price_edges.begin());
  const std::size_t s = bin(soc, soc_bins);
  const std::size_t r = bin(ratio / 2.0, ratio_bins);
  return (s * static_cast<std::size_t>(ratio_bins) + r) * static_cast<std::size_t>(price_bins) +
         std::min(p, static_cast<std::size_t>(price_bins - 1));
}

void q_learning_update(std::vector<double>& q, int actions, std::size_t s, int a, double reward,
                       std::size_t s_next, bool terminal, double learning_rate, double gamma) {
  const auto K = static_cast<std::size_t>(actions);
  double target = reward;
  if (!terminal) {
    const auto row = q.begin() + static_cast<std::ptrdiff_t>(s_next * K);
    target += gamma * *std::max_element(row, row + static_cast<std::ptrdiff_t>(K));
  }
  double& cell = q[s * K + static_cast<std::size_t>(a)];
  cell += learning_rate * (target - cell);
}

QTable tabular_q_train(std::span<const Scenario> scenarios, const QConfig& config, std::uint64_t seed) {
  config.validate();
  if (scenarios.empty()) throw AgentError("tabular_q_train: no scenarios");
  QTable table;
  table.soc_bins = config.soc_bins;
  table.ratio_bins = config.ratio_bins;
  table.price_bins = config.price_bins;
  table.actions = scenarios.front().action_levels;
  std::vector<double> prices;
  for (const auto& s : scenarios) {
    if (s.action_levels != table.actions) throw AgentError("tabular_q_train: scenarios disagree on actions");
    prices.insert(prices.end(), s.series.grid_price_per_kwh.begin(), s.series.grid_price_per_kwh.end());
  }
  std::sort(prices.begin(), prices.end());
  for (int i = 1; i < config.price_bins; ++i) {
    const auto at = static_cast<std::size_t>(static_cast<double>(i) / config.price_bins *
                                             static_cast<double>(prices.size() - 1));
    table.price_edges.push_back(prices[at]);
  }

  Rng rng(seed);
  const auto K = static_cast<std::size_t>(table.actions);
  table.q.resize(table.states() * K);
  for (double& v : table.q) v = 1e-9 * rng.uniform();
  std::vector<std::uint32_t> visits(table.q.size(), 0);

  for (int ep = 0; ep < config.episodes; ++ep) {
    const auto& sc = scenarios[static_cast<std::size_t>(ep) % scenarios.size()];
    const double frac = config.episodes > 1 ? static_cast<double>(ep) / (config.episodes - 1) : 1.0;
    const double eps = config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac;
    EnvState state = reset(sc, seed);
    std::size_t s = table.state_index(sc, state);
    while (!state.done) {
      int a;
      if (rng.uniform() < eps) {
        a = static_cast<int>(rng.below(K));
      } else {
        const auto row = table.q.begin() + static_cast<std::ptrdiff_t>(s * K);
        a = static_cast<int>(std::max_element(row, row + static_cast<std::ptrdiff_t>(K)) - row);
      }
      const auto tr = step(sc, state, Action{a});
      const std::size_t s_next = tr.next.done ? s : table.state_index(sc, tr.next);
      double rate = config.learning_rate;
      if (config.visit_count_rate) {
        const auto n = ++visits[s * K + static_cast<std::size_t>(a)];
        rate = std::max(config.learning_rate, 1.0 / n);
      }
      q_learning_update(table.q, table.actions, s, a, tr.outcome.reward, s_next, tr.next.done, rate,
                        config.gamma);
      state = tr.next;
      s = s_next;
    }
  }
  return table;
}

Action tabular_q_act(const QTable& table, const Scenario& scenario, const EnvState& state) {
  const auto K = static_cast<std::size_t>(table.actions);
  const auto row = table.q.begin() + static_cast<std::ptrdiff_t>(table.state_index(scenario, state) * K);
  return Action{static_cast<int>(std::max_element(row, row + static_cast<std::ptrdiff_t>(K)) - row)};
}

// ---------------------------------------------------------------------------
// Episodes

Controller ppo_controller(const PpoPolicy& policy, const Scenario& scenario) {
  struct Bound {
    nn::Network net;
    nn::ParameterSet params;
    ObservationBuilder builder;
    ObservationContext ctx;
    const Scenario* scenario;
    std::vector<double> obs;
    nn::ForwardCache cache;
    Rng rng;
  };
  auto b = std::make_shared<Bound>(Bound{nn::Network(policy.network), policy.params, policy.observations,
                                         policy.observations.context(scenario), &scenario,
                                         std::vector<double>(policy.observations.size()), {}, Rng(0)});
  return [b](const EnvState& state) {
    b->builder.build(b->ctx, *b->scenario, state, b->obs);
    return act(b->net, b->params.values, b->obs, ActMode::greedy, b->rng, b->cache).action;
  };
}

Controller rule_based_controller(const Scenario& scenario) {
  return [&scenario](const EnvState& state) { return rule_based_act(state, scenario); };
}

Controller heuristic_controller(const Scenario& scenario, ForecastModel forecaster) {
  const auto& x = scenario.series;
  auto forecasts = std::make_shared<std::vector<double>>(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) (*forecasts)[t] = one_step_forecast(x, t, forecaster);
  const double avg = mean_price(x);
  return [&scenario, forecasts, avg](const EnvState& state) {
    return heuristic_choice(state, scenario, (*forecasts)[state.t], avg);
  };
}

Controller tabular_q_controller(const QTable& table, const Scenario& scenario) {
  return [&table, &scenario](const EnvState& state) { return tabular_q_act(table, scenario, state); };
}

EpisodeRun run_episode(const Scenario& scenario, const Controller& controller, std::uint64_t seed) {
  EpisodeRun run;
  run.log.scenario = scenario.label;
  run.log.seed = seed;
  EnvState state = reset(scenario, seed);
  while (!state.done) {
    const Action a = controller(state);
    const auto tr = step(scenario, state, a);
    run.log.steps.push_back({state, a, tr.outcome});
    run.cumulative_reward += tr.outcome.reward;
    state = tr.next;
  }
  return run;
}

}  // namespace greendc
