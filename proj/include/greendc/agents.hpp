#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "greendc/forecast.hpp"
#include "greendc/nn.hpp"
#include "greendc/sim.hpp"
#include "greendc/util.hpp"

namespace greendc {

class AgentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AblationFlags {
  bool no_reward_tuning = false;      // train on alpha = beta = 1, no SLA penalty
  bool no_exploration = false;        // greedy rollouts, no entropy bonus
  bool no_energy_prediction = false;  // forecast features zeroed

  bool any() const { return no_reward_tuning || no_exploration || no_energy_prediction; }
  bool operator==(const AblationFlags&) const = default;
};

std::string ablation_label(const AblationFlags& flags);  // "full", "no_reward_tuning", ...

// Weights the agent is trained on; the scenario's own weights unless reward
// tuning is ablated.
RewardWeights training_weights(const RewardWeights& tuned, const AblationFlags& flags);

// ---------------------------------------------------------------------------
// Observations
//
// Row r of the W x F window describes step t - W + 1 + r:
//   demand, solar, wind, grid price (scaled to [0,1]), hour sin, hour cos,
//   then the current SOC fraction and the H-step renewable forecast, which are
//   repeated on every row. Rows before the episode start are all zero.

struct ObservationScales {
  double demand_kw = 1.0;
  double solar_kw = 1.0;
  double wind_kw = 1.0;
  double renewable_kw = 1.0;
  double price_per_kwh = 1.0;
};

// Per-feature maxima over the scenarios (floors at 1e-9).
ObservationScales fit_scales(std::span<const Scenario> scenarios);

inline constexpr std::size_t kStepFeatures = 6;

struct ObservationSpec {
  int window = 8;
  int horizon = 4;

  int features() const { return static_cast<int>(kStepFeatures) + 1 + horizon; }
};

// Scenario-dependent parts of the observation, precomputed once per episode.
struct ObservationContext {
  std::vector<double> step_rows;  // T x kStepFeatures
  std::vector<double> forecasts;  // T x H, already scaled
};

class ObservationBuilder {
 public:
  ObservationBuilder() = default;
  ObservationBuilder(ObservationSpec spec, ObservationScales scales, ForecastModel forecaster,
                     bool zero_forecast);

  const ObservationSpec& spec() const { return spec_; }
  const ObservationScales& scales() const { return scales_; }
  const ForecastModel& forecaster() const { return forecaster_; }
  bool zero_forecast() const { return zero_forecast_; }
  std::size_t size() const {
    return static_cast<std::size_t>(spec_.window) * static_cast<std::size_t>(spec_.features());
  }

  ObservationContext context(const Scenario& scenario) const;
  void build(const ObservationContext& ctx, const Scenario& scenario, const EnvState& state,
             std::span<double> out) const;

 private:
  ObservationSpec spec_;
  ObservationScales scales_;
  ForecastModel forecaster_;
  bool zero_forecast_ = false;
};

// AR(4) renewable forecaster fitted on the concatenated scenario renewables.
ForecastModel fit_renewable_forecaster(std::span<const Scenario> scenarios);

ObservationBuilder make_observation_builder(std::span<const Scenario> training, const AblationFlags& flags,
                                            ObservationSpec spec = {});

// Uncached convenience form.
std::vector<double> build_observation(const EnvState& state, const Scenario& scenario,
                                      const ObservationBuilder& builder);

// ---------------------------------------------------------------------------
// Policy evaluation

enum class ActMode { sample, greedy };

struct ActResult {
  Action action;
  double log_prob = 0.0;
  double value = 0.0;
};

// Inverse-CDF draw from `probs`; greedy picks the lowest-index maximum.
int sample_index(std::span<const double> probs, Rng& rng);
int greedy_index(std::span<const double> probs);

ActResult act(const nn::Network& net, std::span<const double> params, std::span<const double> observation,
              ActMode mode, Rng& rng, nn::ForwardCache& cache);

// ---------------------------------------------------------------------------
// PPO

struct PPOConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  int epochs = 4;
  int minibatch = 64;
  int rollout_length = 2048;
  int updates = 200;
  double learning_rate = 3e-4;
  double max_grad_norm = 0.5;
  bool normalize_rewards = true;  // divide by running std of the discounted return
  bool anneal_learning_rate = false;  // linear decay to zero over the updates
  // Every `select_every` updates the greedy policy is scored on the training
  // scenarios and the best-scoring parameters are returned; 0 keeps the last.
  int select_every = 0;

  void validate() const;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// `bootstrap` is V(s_T) for the state after the last step; ignored when the
// last step is terminal.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double bootstrap, double gamma, double lambda);

struct RolloutBuffer {
  std::size_t obs_size = 0;
  std::vector<double> observations;  // size() x obs_size
  std::vector<int> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  std::vector<double> advantages;
  std::vector<double> returns;

  explicit RolloutBuffer(std::size_t observation_size = 0) : obs_size(observation_size) {}

  std::size_t size() const { return actions.size(); }
  bool ready() const { return advantages.size() == size() && returns.size() == size(); }
  void clear();
  void add(std::span<const double> observation, int action, double log_prob, double reward, double value,
           bool done);
  void finish(double bootstrap, double gamma, double lambda);
  std::span<const double> observation(std::size_t i) const;
};

struct PPODiagnostics {
  double policy_loss = 0.0;  // negated clipped surrogate, minibatch mean
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  std::size_t minibatches = 0;
  std::size_t skipped_steps = 0;  // optimizer steps rejected for non-finite gradients
  bool aborted = false;           // non-finite loss; parameters restored
};

// Minibatch advantages are normalized to zero mean and unit variance.
PPODiagnostics ppo_update(const nn::Network& net, nn::ParameterSet& params, const RolloutBuffer& buffer,
                          const PPOConfig& config, Rng& rng);

struct PpoPolicy {
  nn::NetworkConfig network;
  nn::ParameterSet params;
  ObservationBuilder observations;
};

struct LearningCurvePoint {
  int update_index = 0;
  std::size_t episodes = 0;  // episodes completed so far
  double mean_cumulative_reward = 0.0;
  double mean_cost = 0.0;
  double sla_rate = 0.0;
};

struct TrainResult {
  PpoPolicy policy;
  std::vector<LearningCurvePoint> curve;  // one row per update that completed an episode
  std::vector<double> episode_rewards;    // cumulative reward of every finished training episode
  int selected_update = -1;               // update whose parameters were kept (-1: initialization)
};

// An empty `network.hidden` selects NetworkConfig::desk_default. Scenarios are
// visited round-robin, one episode at a time.
using TrainObserver = std::function<void(int update, const PpoPolicy&, const PPODiagnostics&)>;

TrainResult train(std::span<const Scenario> scenarios, const PPOConfig& config, const AblationFlags& flags,
                  std::uint64_t seed, nn::NetworkConfig network = {}, ObservationSpec spec = {},
                  const TrainObserver& on_update = {});

std::string learning_curve_csv(const std::vector<LearningCurvePoint>& curve);

// ---------------------------------------------------------------------------
// Baselines

// Charge at max on surplus; discharge at max on deficit while SOC is above
// the bottom quarter of the usable range; idle otherwise.
Action rule_based_act(const EnvState& state, const Scenario& scenario);

// Myopic: minimizes this step's weighted cost under a one-step renewable
// forecast, crediting stored energy at its value against the mean tariff.
Action heuristic_act(const EnvState& state, const Scenario& scenario, const ForecastModel& forecaster);

struct QConfig {
  int soc_bins = 5;
  int ratio_bins = 4;  // renewable/demand ratio over [0, 2]
  int price_bins = 3;  // quantiles of the training tariff
  int episodes = 3000;
  double learning_rate = 0.01;
  // Step size 1/n for the n-th visit of a state-action pair, floored at
  // learning_rate; off gives a constant learning_rate.
  bool visit_count_rate = true;
  double gamma = 0.95;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;

  void validate() const;
};

struct QTable {
  int soc_bins = 0, ratio_bins = 0, price_bins = 0, actions = 0;
  std::vector<double> price_edges;  // price_bins - 1 ascending cut points
  std::vector<double> q;            // states x actions

  std::size_t states() const {
    return static_cast<std::size_t>(soc_bins) * static_cast<std::size_t>(ratio_bins) *
           static_cast<std::size_t>(price_bins);
  }
  std::size_t state_index(const Scenario& scenario, const EnvState& state) const;
  bool operator==(const QTable&) const = default;
};

// One-step Q-learning backup on a flat states x actions table.
void q_learning_update(std::vector<double>& q, int actions, std::size_t s, int a, double reward,
                       std::size_t s_next, bool terminal, double learning_rate, double gamma);

// Epsilon decays linearly over the episodes. The table starts with tiny
// seeded noise so untrained greedy choices are uniformly random.
QTable tabular_q_train(std::span<const Scenario> scenarios, const QConfig& config, std::uint64_t seed);
Action tabular_q_act(const QTable& table, const Scenario& scenario, const EnvState& state);

// ---------------------------------------------------------------------------
// Episodes

// Controllers keep references to the scenario (and table) they are bound to.
using Controller = std::function<Action(const EnvState&)>;

Controller ppo_controller(const PpoPolicy& policy, const Scenario& scenario);
Controller rule_based_controller(const Scenario& scenario);
Controller heuristic_controller(const Scenario& scenario, ForecastModel forecaster);
Controller tabular_q_controller(const QTable& table, const Scenario& scenario);

struct EpisodeRun {
  EpisodeLog log;
  double cumulative_reward = 0.0;  // accumulated while stepping
};

EpisodeRun run_episode(const Scenario& scenario, const Controller& controller, std::uint64_t seed);

}  // namespace greendc
