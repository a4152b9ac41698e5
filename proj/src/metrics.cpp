#include "greendc/metrics.hpp"

#include <cmath>

#include "greendc/util.hpp"

namespace greendc {

double energy_cost(const EpisodeLog& log) {
  double total = 0.0;
  for (const auto& s : log.steps) {
    const auto& o = s.outcome;
    total += o.grid_kwh * o.grid_price_per_kwh + o.discharge_kwh * o.storage_price_per_kwh;
  }
  return total;
}

SlaCount sla_violations(const EpisodeLog& log) {
  SlaCount c;
  for (const auto& s : log.steps) {
    const double supplied = s.outcome.demand_kwh - s.outcome.unserved_kwh;
    if (s.outcome.demand_kwh > supplied) ++c.count;
  }
  if (!log.steps.empty()) c.rate = static_cast<double>(c.count) / static_cast<double>(log.steps.size());
  return c;
}

double energy_efficiency(const EpisodeLog& log) {
  double renewable = 0.0, served = 0.0;
  for (const auto& s : log.steps) {
    renewable += s.outcome.renewable_used_kwh;
    served += s.outcome.demand_kwh - s.outcome.unserved_kwh;
  }
  if (!(served > 0.0)) throw MetricError("energy_efficiency: no energy was served");
  return renewable / served;
}

double cumulative_reward(const EpisodeLog& log) {
  double total = 0.0;
  for (const auto& s : log.steps) total += s.outcome.reward;
  return total;
}

double carbon_emissions(const EpisodeLog& log) {
  double total = 0.0;
  for (const auto& s : log.steps) total += s.outcome.grid_kwh * s.outcome.emission_factor_kg_per_kwh;
  return total;
}

void SuccessGoals::validate() const {
  if (!(min_efficiency >= 0.0 && min_efficiency <= 1.0)) throw MetricError("efficiency goal must be in [0, 1]");
  if (!(max_sla_rate >= 0.0 && max_sla_rate <= 1.0)) throw MetricError("SLA-rate goal must be in [0, 1]");
}

bool meets_goals(const MetricReport& r, const SuccessGoals& goals) {
  return r.energy_efficiency >= goals.min_efficiency && r.sla_rate <= goals.max_sla_rate;
}

MetricReport evaluate(const EpisodeLog& log, const SuccessGoals& goals) {
  goals.validate();
  MetricReport r;
  r.steps = log.steps.size();
  r.energy_cost = energy_cost(log);
  const auto sla = sla_violations(log);
  r.sla_violations = sla.count;
  r.sla_rate = sla.rate;
  r.energy_efficiency = energy_efficiency(log);
  r.cumulative_reward = cumulative_reward(log);
  r.carbon_emissions_kg = carbon_emissions(log);
  r.success_rate = meets_goals(r, goals) ? 1.0 : 0.0;
  return r;
}

double success_rate(std::span<const MetricReport> reports, const SuccessGoals& goals) {
  goals.validate();
  if (reports.empty()) throw MetricError("success_rate: no scenario reports");
  std::size_t ok = 0;
  for (const auto& r : reports) ok += meets_goals(r, goals) ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(reports.size());
}

std::string to_csv_row(const MetricReport& r) {
  return std::to_string(r.steps) + ',' + format_double(r.energy_cost) + ',' + std::to_string(r.sla_violations) +
         ',' + format_double(r.sla_rate) + ',' + format_double(r.energy_efficiency) + ',' +
         format_double(r.cumulative_reward) + ',' + format_double(r.carbon_emissions_kg) + ',' +
         format_double(r.success_rate);
}

MetricReport metric_report_from_csv(const std::string& row) {
  const auto rows = parse_csv_rows(row);
  if (rows.size() != 1 || rows[0].fields.size() != 8)
    throw MetricError("metric row must have 8 fields: " + std::string(kMetricColumns));
  const auto& f = rows[0].fields;
  double v[8];
  for (std::size_t i = 0; i < 8; ++i)
    if (!parse_double(f[i], v[i])) throw MetricError("metric row: field " + std::to_string(i + 1) + " is not numeric");
  MetricReport r;
  r.steps = static_cast<std::size_t>(v[0]);
  r.energy_cost = v[1];
  r.sla_violations = static_cast<std::size_t>(v[2]);
  r.sla_rate = v[3];
  r.energy_efficiency = v[4];
  r.cumulative_reward = v[5];
  r.carbon_emissions_kg = v[6];
  r.success_rate = v[7];
  return r;
}

}  // namespace greendc
