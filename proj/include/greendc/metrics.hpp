#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "greendc/sim.hpp"

namespace greendc {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// All metrics read only the per-step fields of a log.

// Sum of grid energy at its step price plus storage discharge at its price.
double energy_cost(const EpisodeLog& log);

struct SlaCount {
  std::size_t count = 0;
  double rate = 0.0;  // count / steps, 0 for an empty log
};

// Steps where demand exceeded the energy actually supplied.
SlaCount sla_violations(const EpisodeLog& log);

// Episode ratio of sums: renewable energy used directly / energy served.
// Throws when nothing was served.
double energy_efficiency(const EpisodeLog& log);

double cumulative_reward(const EpisodeLog& log);

// kg CO2: grid energy times the step's emission factor.
double carbon_emissions(const EpisodeLog& log);

struct SuccessGoals {
  double min_efficiency = 0.80;
  double max_sla_rate = 0.02;

  void validate() const;
};

struct MetricReport {
  std::size_t steps = 0;
  double energy_cost = 0.0;
  std::size_t sla_violations = 0;
  double sla_rate = 0.0;
  double energy_efficiency = 0.0;
  double cumulative_reward = 0.0;
  double carbon_emissions_kg = 0.0;
  double success_rate = 0.0;  // 1 when this episode meets the goals

  bool operator==(const MetricReport&) const = default;
};

bool meets_goals(const MetricReport& report, const SuccessGoals& goals);

MetricReport evaluate(const EpisodeLog& log, const SuccessGoals& goals = {});

// Fraction of reports meeting the goals. Throws on empty input.
double success_rate(std::span<const MetricReport> reports, const SuccessGoals& goals = {});

// Fixed column order of the CSV row form.
inline constexpr const char* kMetricColumns =
    "steps,energy_cost,sla_violations,sla_rate,energy_efficiency,cumulative_reward,carbon_emissions_kg,"
    "success_rate";

std::string to_csv_row(const MetricReport& report);
MetricReport metric_report_from_csv(const std::string& row);

}  // namespace greendc
