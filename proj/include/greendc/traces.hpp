#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "greendc/sim.hpp"

namespace greendc {

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Seconds since 1970-01-01T00:00:00Z.
using EpochSeconds = std::int64_t;

EpochSeconds parse_timestamp(const std::string& iso8601);
std::string format_timestamp(EpochSeconds t);

enum QualityFlag : std::uint32_t {
  quality_ok = 0,
  quality_winsorized = 1u << 0,
  quality_filled = 1u << 1,
};

struct RawRecord {
  EpochSeconds timestamp = 0;
  std::optional<double> solar_kw;
  std::optional<double> wind_kw;
  std::optional<double> demand_kw;
  std::optional<double> grid_price_per_kwh;
  std::optional<double> soc_kwh;
  std::uint32_t quality = quality_ok;

  bool operator==(const RawRecord&) const = default;
};

inline constexpr const char* kTraceHeader = "timestamp,solar_kw,wind_kw,demand_kw,grid_price_per_kwh";

std::vector<RawRecord> parse_csv(const std::string& text);
std::string to_csv(std::span<const RawRecord> records);
std::vector<RawRecord> load_csv(const std::string& path);
void save_csv(std::span<const RawRecord> records, const std::string& path);

// Single winsorizing pass at mean +/- k population standard deviations.
std::vector<double> winsorize(std::span<const double> values, double k = 5.0);

// Drops invalid records, sorts by time, removes duplicate timestamps (first
// kept) and winsorizes each feature until no value lies beyond mean +/- 5 sd
// of the output itself.
std::vector<RawRecord> clean(std::span<const RawRecord> raw);

struct FeatureRange {
  double min = 0.0;
  double max = 0.0;
};

double minmax_normalize(double x, FeatureRange range);
double denormalize(double normalized, FeatureRange range);

struct TimeEncoding {
  double sin = 0.0;
  double cos = 1.0;
};

// Hour-of-day on the unit circle; 00:00 -> (0, 1), 06:00 -> (1, 0).
TimeEncoding encode_time(EpochSeconds t);

// Per-interval means on a uniform grid starting at the first record; empty
// intervals repeat the previous interval.
std::vector<RawRecord> aggregate(std::span<const RawRecord> records, double timestep_hours);

enum class Feature : std::size_t { solar = 0, wind, renewable, demand, grid_price, soc, count };
inline constexpr std::size_t kFeatureCount = static_cast<std::size_t>(Feature::count);
const char* feature_name(Feature f);

struct NormalizationStats {
  std::array<FeatureRange, kFeatureCount> ranges{};

  FeatureRange operator[](Feature f) const { return ranges[static_cast<std::size_t>(f)]; }
};

struct UnifiedRecord {
  std::size_t step = 0;
  EpochSeconds timestamp = 0;
  std::array<double, kFeatureCount> raw{};
  std::array<double, kFeatureCount> normalized{};
  TimeEncoding time;
};

struct UnifiedDataset {
  double timestep_hours = 0.25;
  bool has_soc = false;
  NormalizationStats stats;
  std::vector<UnifiedRecord> records;
};

// Inner join of aggregated streams on their step index. Each field is taken
// from the first stream that carries it.
UnifiedDataset integrate(std::span<const std::vector<RawRecord>> streams, double timestep_hours);

// clean -> aggregate -> integrate for one combined stream.
UnifiedDataset preprocess(std::span<const RawRecord> raw, double timestep_hours);

std::string unified_to_csv(const UnifiedDataset& data);

enum class Preset { high, low, mixed };

Preset parse_preset(const std::string& name);
std::string preset_name(Preset p);
double preset_renewable_ratio(Preset p);

// Synthetic week-scale traces: bell-shaped solar, autoregressive wind,
// diurnal e-commerce demand, time-of-use tariff. Renewable capacity is scaled
// so mean(renewable) / mean(demand) equals the preset ratio.
ExogenousSeries synthesize(Preset preset, int days, std::uint64_t seed, double timestep_hours = 0.25);

// Scenario with the default battery and reward weights around a synthesized
// series.
Scenario make_scenario(Preset preset, int days, std::uint64_t seed, double timestep_hours = 0.25);

std::vector<RawRecord> series_to_records(const ExogenousSeries& series, EpochSeconds start = 1704067200);
ExogenousSeries records_to_series(std::span<const RawRecord> records, double timestep_hours);

}  // namespace greendc
