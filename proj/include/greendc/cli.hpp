#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "greendc/agents.hpp"
#include "greendc/harness.hpp"

namespace greendc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything a run needs besides the subcommand. `plan` carries the
// experiment settings; the remaining fields describe single-agent runs.
struct RunConfig {
  ExperimentPlan plan;
  Preset preset = Preset::high;
  std::string traces;  // CSV trace file replacing the synthetic preset when set
  AgentKind agent = AgentKind::ppo;
  AblationFlags ablation;
  std::uint64_t seed = 1;
  std::string out = "out";

  bool operator==(const RunConfig& o) const { return to_text() == o.to_text(); }
  std::string to_text() const;
};

// `key = value` lines; '#' starts a comment. Absent keys keep defaults.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});

// Applies one setting, throwing ConfigError naming the key on failure.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

// Saved alongside a trained PPO checkpoint so evaluation rebuilds the same
// observation pipeline.
std::string observation_to_json(const ObservationBuilder& builder);
ObservationBuilder observation_from_json(const std::string& text);
std::string qtable_to_json(const QTable& table);
QTable qtable_from_json(const std::string& text);

// Exit codes: 0 success, 1 usage error, 2 runtime failure.
int dispatch_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace greendc
