#pragma once

#include <sstream>
#include <string>

#include <json.hpp>

// Metric values recomputed straight from the raw JSONL text, without going
// through the log types.
struct BruteForceMetrics {
  double energy_cost = 0.0;
  double sla_count = 0.0;
  double sla_rate = 0.0;
  double efficiency = 0.0;
  double reward = 0.0;
  double emissions = 0.0;
};

inline BruteForceMetrics brute_force_metrics(const std::string& jsonl) {
  BruteForceMetrics m;
  std::istringstream in(jsonl);
  std::string line;
  double steps = 0.0, used = 0.0, served = 0.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const double grid = j["grid_kwh"].get<double>();
    const double demand = j["demand_kwh"].get<double>();
    const double unserved = j["unserved_kwh"].get<double>();
    m.energy_cost += grid * j["grid_price_per_kwh"].get<double>() +
                     j["discharge_kwh"].get<double>() * j["storage_price_per_kwh"].get<double>();
    if (unserved > 0.0) m.sla_count += 1.0;
    used += j["renewable_used_kwh"].get<double>();
    served += demand - unserved;
    m.reward += j["reward"].get<double>();
    m.emissions += grid * j["emission_factor_kg_per_kwh"].get<double>();
    steps += 1.0;
  }
  m.sla_rate = steps > 0 ? m.sla_count / steps : 0.0;
  m.efficiency = served > 0 ? used / served : 0.0;
  return m;
}
