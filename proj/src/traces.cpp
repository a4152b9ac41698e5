#include "greendc/traces.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "greendc/util.hpp"

namespace greendc {

// ---------------------------------------------------------------------------
// Timestamps

EpochSeconds parse_timestamp(const std::string& s) {
  // YYYY-MM-DD[THH:MM[:SS]][Z]
  auto fail = [&]() -> EpochSeconds { throw TraceError("unparseable timestamp '" + s + "'"); };
  auto num = [&](std::size_t pos, std::size_t len) {
    if (pos + len > s.size()) fail();
    int v = 0;
    auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
    if (ec != std::errc() || p != s.data() + pos + len) fail();
    return v;
  };
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') fail();
  const int year = num(0, 4), month = num(5, 2), day = num(8, 2);
  int hour = 0, minute = 0, second = 0;
  std::size_t pos = 10;
  if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
    hour = num(pos + 1, 2);
    if (pos + 3 >= s.size() || s[pos + 3] != ':') fail();
    minute = num(pos + 4, 2);
    pos += 6;
    if (pos < s.size() && s[pos] == ':') {
      second = num(pos + 1, 2);
      pos += 3;
    }
  }
  if (pos < s.size() && s[pos] == 'Z') ++pos;
  if (pos != s.size()) fail();
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 59) fail();
  const auto days_since = sys_days{ymd}.time_since_epoch().count();
  return static_cast<EpochSeconds>(days_since) * 86400 + hour * 3600 + minute * 60 + second;
}

std::string format_timestamp(EpochSeconds t) {
  using namespace std::chrono;
  EpochSeconds days = t >= 0 ? t / 86400 : -((-t + 86399) / 86400);
  EpochSeconds rem = t - days * 86400;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(rem / 3600), static_cast<int>((rem % 3600) / 60),
                static_cast<int>(rem % 60));
  return buf;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

const std::vector<std::string> kColumns = {"timestamp", "solar_kw", "wind_kw", "demand_kw",
                                           "grid_price_per_kwh", "soc_kwh"};

std::optional<double> parse_optional(const std::string& field, std::size_t line, const std::string& col) {
  if (field.empty()) return std::nullopt;
  double v = 0.0;
  if (field == "nan" || field == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (!parse_double(field, v))
    throw TraceError("line " + std::to_string(line) + ": column '" + col + "' is not numeric: '" +
                     field + "'");
  return v;
}

}  // namespace

std::vector<RawRecord> parse_csv(const std::string& text) {
  const auto rows = parse_csv_rows(text);
  if (rows.empty()) throw TraceError("trace CSV is empty");
  const auto& header = rows.front().fields;
  std::vector<int> slot(header.size(), -1);
  for (std::size_t c = 0; c < header.size(); ++c) {
    auto it = std::find(kColumns.begin(), kColumns.end(), header[c]);
    if (it == kColumns.end()) throw TraceError("unknown column '" + header[c] + "'");
    slot[c] = static_cast<int>(it - kColumns.begin());
  }
  for (std::size_t k = 0; k < 5; ++k) {
    if (std::find(slot.begin(), slot.end(), static_cast<int>(k)) == slot.end())
      throw TraceError("missing column '" + kColumns[k] + "'");
  }
  std::vector<RawRecord> out;
  out.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != header.size())
      throw TraceError("line " + std::to_string(row.line) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(row.fields.size()));
    RawRecord rec;
    for (std::size_t c = 0; c < row.fields.size(); ++c) {
      const auto& f = row.fields[c];
      const auto& col = kColumns[static_cast<std::size_t>(slot[c])];
      switch (slot[c]) {
        case 0:
          try {
            rec.timestamp = parse_timestamp(f);
          } catch (const TraceError& e) {
            throw TraceError("line " + std::to_string(row.line) + ": " + e.what());
          }
          break;
        case 1: rec.solar_kw = parse_optional(f, row.line, col); break;
        case 2: rec.wind_kw = parse_optional(f, row.line, col); break;
        case 3: rec.demand_kw = parse_optional(f, row.line, col); break;
        case 4: rec.grid_price_per_kwh = parse_optional(f, row.line, col); break;
        case 5: rec.soc_kwh = parse_optional(f, row.line, col); break;
        default: break;
      }
    }
    out.push_back(rec);
  }
  return out;
}

std::string to_csv(std::span<const RawRecord> records) {
  const bool with_soc = std::any_of(records.begin(), records.end(),
                                    [](const RawRecord& r) { return r.soc_kwh.has_value(); });
  std::string out = kTraceHeader;
  if (with_soc) out += ",soc_kwh";
  out += '\n';
  auto put = [&](const std::optional<double>& v) {
    out += ',';
    if (v) out += format_double(*v);
  };
  for (const auto& r : records) {
    out += format_timestamp(r.timestamp);
    put(r.solar_kw);
    put(r.wind_kw);
    put(r.demand_kw);
    put(r.grid_price_per_kwh);
    if (with_soc) put(r.soc_kwh);
    out += '\n';
  }
  return out;
}

std::vector<RawRecord> load_csv(const std::string& path) {
  return parse_csv(read_file(path));
}

void save_csv(std::span<const RawRecord> records, const std::string& path) {
  write_file(path, to_csv(records));
}

// ---------------------------------------------------------------------------
// Cleaning

namespace {

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

Moments moments(std::span<const double> v) {
  Moments m;
  if (v.empty()) return m;
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.sd = std::sqrt(ss / static_cast<double>(v.size()));
  return m;
}

bool valid_value(const std::optional<double>& v) { return v && std::isfinite(*v) && *v >= 0.0; }

using FieldPtr = std::optional<double> RawRecord::*;
constexpr std::array<FieldPtr, 5> kNumericFields = {&RawRecord::solar_kw, &RawRecord::wind_kw,
                                                    &RawRecord::demand_kw,
                                                    &RawRecord::grid_price_per_kwh, &RawRecord::soc_kwh};

}  // namespace

std::vector<double> winsorize(std::span<const double> values, double k) {
  const auto m = moments(values);
  std::vector<double> out(values.begin(), values.end());
  const double lo = m.mean - k * m.sd, hi = m.mean + k * m.sd;
  for (double& x : out) x = std::clamp(x, lo, hi);
  return out;
}

std::vector<RawRecord> clean(std::span<const RawRecord> raw) {
  std::vector<RawRecord> kept;
  kept.reserve(raw.size());
  for (const auto& r : raw) {
    if (!valid_value(r.solar_kw) || !valid_value(r.wind_kw) || !valid_value(r.demand_kw) ||
        !valid_value(r.grid_price_per_kwh))
      continue;
    RawRecord c = r;
    if (c.soc_kwh && !valid_value(c.soc_kwh)) c.soc_kwh.reset();
    kept.push_back(c);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const RawRecord& a, const RawRecord& b) { return a.timestamp < b.timestamp; });
  kept.erase(std::unique(kept.begin(), kept.end(),
                         [](const RawRecord& a, const RawRecord& b) { return a.timestamp == b.timestamp; }),
             kept.end());

  // Winsorize each feature to a fixed point so clean(clean(x)) == clean(x).
  for (FieldPtr field : kNumericFields) {
    std::vector<std::size_t> idx;
    std::vector<double> vals;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (kept[i].*field) {
        idx.push_back(i);
        vals.push_back(*(kept[i].*field));
      }
    }
    if (vals.size() < 2) continue;
    std::vector<bool> touched(vals.size(), false);
    for (int iter = 0; iter < 200; ++iter) {
      const auto m = moments(vals);
      const double slack = 1e-9 * std::max(1.0, std::abs(m.mean) + m.sd);
      const double lo = m.mean - 5.0 * m.sd, hi = m.mean + 5.0 * m.sd;
      bool changed = false;
      for (std::size_t i = 0; i < vals.size(); ++i) {
        if (vals[i] > hi + slack || vals[i] < lo - slack) {
          vals[i] = std::clamp(vals[i], lo, hi);
          touched[i] = true;
          changed = true;
        }
      }
      if (!changed) break;
    }
    for (std::size_t i = 0; i < idx.size(); ++i) {
      kept[idx[i]].*field = std::max(0.0, vals[i]);
      if (touched[i]) kept[idx[i]].quality |= quality_winsorized;
    }
  }
  if (kept.empty()) throw TraceError("clean: no usable records remain");
  return kept;
}

// ---------------------------------------------------------------------------
// Transformation

double minmax_normalize(double x, FeatureRange r) {
  if (!(r.max > r.min)) return 0.0;
  return (x - r.min) / (r.max - r.min);
}

double denormalize(double v, FeatureRange r) {
  if (!(r.max > r.min)) return r.min;
  return r.min + v * (r.max - r.min);
}

TimeEncoding encode_time(EpochSeconds t) {
  EpochSeconds sod = t % 86400;
  if (sod < 0) sod += 86400;
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(sod) / 86400.0;
  return {std::sin(angle), std::cos(angle)};
}

std::vector<RawRecord> aggregate(std::span<const RawRecord> records, double timestep_hours) {
  if (records.empty()) throw TraceError("aggregate: empty input");
  if (!(timestep_hours > 0.0)) throw TraceError("aggregate: timestep must be positive");
  const auto width = static_cast<EpochSeconds>(std::llround(timestep_hours * 3600.0));
  if (width <= 0) throw TraceError("aggregate: timestep below one second");
  const EpochSeconds t0 = records.front().timestamp;
  EpochSeconds sample = 0;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const EpochSeconds gap = records[i].timestamp - records[i - 1].timestamp;
    if (gap < 0) throw TraceError("aggregate: records must be sorted");
    if (gap > 0 && (sample == 0 || gap < sample)) sample = gap;
  }
  if (sample == 0) sample = width;
  const EpochSeconds span = records.back().timestamp - t0 + sample;
  const auto bins = static_cast<std::size_t>((span + width - 1) / width);

  struct Acc {
    std::array<double, 5> sum{};
    std::array<std::size_t, 5> n{};
  };
  std::vector<Acc> acc(bins);
  for (const auto& r : records) {
    const auto b = static_cast<std::size_t>((r.timestamp - t0) / width);
    for (std::size_t f = 0; f < kNumericFields.size(); ++f) {
      if (const auto& v = r.*kNumericFields[f]) {
        acc[b].sum[f] += *v;
        ++acc[b].n[f];
      }
    }
  }
  std::vector<RawRecord> out(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].timestamp = t0 + static_cast<EpochSeconds>(b) * width;
    for (std::size_t f = 0; f < kNumericFields.size(); ++f) {
      if (acc[b].n[f] > 0) {
        out[b].*kNumericFields[f] = acc[b].sum[f] / static_cast<double>(acc[b].n[f]);
      } else if (b > 0 && out[b - 1].*kNumericFields[f]) {
        out[b].*kNumericFields[f] = out[b - 1].*kNumericFields[f];
        out[b].quality |= quality_filled;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Integration

const char* feature_name(Feature f) {
  switch (f) {
    case Feature::solar: return "solar_kw";
    case Feature::wind: return "wind_kw";
    case Feature::renewable: return "renewable_kw";
    case Feature::demand: return "demand_kw";
    case Feature::grid_price: return "grid_price_per_kwh";
    case Feature::soc: return "soc_kwh";
    default: return "?";
  }
}

UnifiedDataset integrate(std::span<const std::vector<RawRecord>> streams, double timestep_hours) {
  if (streams.empty()) throw TraceError("integrate: no streams");
  const auto width = static_cast<EpochSeconds>(std::llround(timestep_hours * 3600.0));
  EpochSeconds t0 = std::numeric_limits<EpochSeconds>::max();
  for (const auto& s : streams) {
    if (s.empty()) throw TraceError("integrate: empty intersection");
    t0 = std::min(t0, s.front().timestamp);
  }
  // step index -> per-stream record
  std::map<std::int64_t, std::vector<const RawRecord*>> joined;
  for (std::size_t k = 0; k < streams.size(); ++k) {
    for (const auto& r : streams[k]) {
      const EpochSeconds off = r.timestamp - t0;
      if (off % width != 0) throw TraceError("integrate: stream not aligned to the timestep grid");
      auto& slot = joined[off / width];
      slot.resize(streams.size(), nullptr);
      slot[k] = &r;
    }
  }
  UnifiedDataset data;
  data.timestep_hours = timestep_hours;
  auto pick = [&](const std::vector<const RawRecord*>& rs, FieldPtr field) -> std::optional<double> {
    for (const auto* r : rs)
      if (r && r->*field) return r->*field;
    return std::nullopt;
  };
  for (const auto& [index, rs] : joined) {
    if (std::any_of(rs.begin(), rs.end(), [](const RawRecord* r) { return r == nullptr; })) continue;
    const auto solar = pick(rs, &RawRecord::solar_kw);
    const auto wind = pick(rs, &RawRecord::wind_kw);
    const auto demand = pick(rs, &RawRecord::demand_kw);
    const auto price = pick(rs, &RawRecord::grid_price_per_kwh);
    const auto soc = pick(rs, &RawRecord::soc_kwh);
    if (!solar || !wind || !demand || !price) continue;
    UnifiedRecord u;
    u.timestamp = t0 + index * width;
    u.raw[static_cast<std::size_t>(Feature::solar)] = *solar;
    u.raw[static_cast<std::size_t>(Feature::wind)] = *wind;
    u.raw[static_cast<std::size_t>(Feature::renewable)] = *solar + *wind;
    u.raw[static_cast<std::size_t>(Feature::demand)] = *demand;
    u.raw[static_cast<std::size_t>(Feature::grid_price)] = *price;
    u.raw[static_cast<std::size_t>(Feature::soc)] = soc.value_or(0.0);
    data.has_soc = data.has_soc || soc.has_value();
    u.time = encode_time(u.timestamp);
    data.records.push_back(u);
  }
  if (data.records.empty()) throw TraceError("integrate: empty intersection");

  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    FeatureRange r{data.records.front().raw[f], data.records.front().raw[f]};
    for (const auto& u : data.records) {
      r.min = std::min(r.min, u.raw[f]);
      r.max = std::max(r.max, u.raw[f]);
    }
    data.stats.ranges[f] = r;
  }
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    auto& u = data.records[i];
    u.step = i;
    for (std::size_t f = 0; f < kFeatureCount; ++f)
      u.normalized[f] = std::clamp(minmax_normalize(u.raw[f], data.stats.ranges[f]), 0.0, 1.0);
  }
  return data;
}

UnifiedDataset preprocess(std::span<const RawRecord> raw, double timestep_hours) {
  const auto cleaned = clean(raw);
  std::vector<std::vector<RawRecord>> streams{aggregate(cleaned, timestep_hours)};
  return integrate(streams, timestep_hours);
}

std::string unified_to_csv(const UnifiedDataset& data) {
  std::string out = "step,timestamp";
  for (std::size_t f = 0; f < kFeatureCount; ++f) out += std::string(",") + feature_name(Feature(f));
  for (std::size_t f = 0; f < kFeatureCount; ++f)
    out += std::string(",") + feature_name(Feature(f)) + "_norm";
  out += ",hour_sin,hour_cos\n";
  for (const auto& u : data.records) {
    out += std::to_string(u.step) + "," + format_timestamp(u.timestamp);
    for (double v : u.raw) out += "," + format_double(v);
    for (double v : u.normalized) out += "," + format_double(v);
    out += "," + format_double(u.time.sin) + "," + format_double(u.time.cos) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator

Preset parse_preset(const std::string& name) {
  if (name == "high") return Preset::high;
  if (name == "low") return Preset::low;
  if (name == "mixed") return Preset::mixed;
  throw TraceError("unknown preset '" + name + "' (expected high, low or mixed)");
}

std::string preset_name(Preset p) {
  switch (p) {
    case Preset::high: return "high";
    case Preset::low: return "low";
    case Preset::mixed: return "mixed";
  }
  return "?";
}

double preset_renewable_ratio(Preset p) {
  switch (p) {
    case Preset::high: return 1.3;
    case Preset::low: return 0.5;
    case Preset::mixed: return 0.9;
  }
  return 1.0;
}

namespace {

double solar_share(Preset p) {
  switch (p) {
    case Preset::high: return 0.65;
    case Preset::low: return 0.6;
    case Preset::mixed: return 0.5;
  }
  return 0.5;
}

constexpr double kStressProbability = 0.3;
constexpr double kStressCapFraction = 0.6;

// Time-of-use tariff in currency per kWh by hour of day.
double tariff(double hour) {
  if (hour >= 17.0 && hour < 21.0) return 0.70;
  if (hour >= 7.0 && hour < 17.0) return 0.12;
  return 0.05;
}

}  // namespace

ExogenousSeries synthesize(Preset preset, int days, std::uint64_t seed, double dt) {
  if (days < 1) throw TraceError("synthesize: days must be >= 1");
  if (!(dt > 0.0) || dt > 24.0) throw TraceError("synthesize: invalid timestep");
  const auto per_day = static_cast<std::size_t>(std::llround(24.0 / dt));
  const std::size_t n = per_day * static_cast<std::size_t>(days);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);

  LoadModel load;
  load.base_load_kw = 60.0;
  load.activity_load.resize(n);
  load.cooling_overhead.resize(n);
  std::vector<double> solar(n), wind(n);

  double load_noise = 0.0;
  double wind_state = 0.0;
  double cloud = 1.0;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    const double hour = std::fmod(static_cast<double>(i) * dt, 24.0);
    const std::size_t day = i / per_day;
    if (i % per_day == 0) cloud = 0.45 + 0.55 * rng.uniform();
    const bool weekend = (day % 7) >= 5;

    load_noise = 0.9 * load_noise + 1.5 * rng.normal();
    double activity = 25.0 * (0.55 + 0.45 * std::cos(two_pi * (hour - 20.0) / 24.0)) +
                      6.0 * std::exp(-0.5 * std::pow((hour - 12.5) / 1.5, 2.0)) + load_noise;
    if (weekend) activity *= 1.15;
    activity = std::max(0.0, activity);
    const double cooling =
        0.15 * (load.base_load_kw + activity) + 6.0 * (1.0 + std::sin(two_pi * (hour - 9.0) / 24.0));
    load.activity_load[i] = activity;
    load.cooling_overhead[i] = std::max(0.0, cooling);

    if (hour > 6.0 && hour < 18.0) {
      const double shape = std::pow(std::sin(std::numbers::pi * (hour - 6.0) / 12.0), 1.5);
      solar[i] = std::max(0.0, shape * cloud * (1.0 + 0.08 * rng.normal()));
    } else {
      solar[i] = 0.0;
    }

    wind_state = 0.97 * wind_state + 0.18 * rng.normal();
    wind[i] = std::max(0.0, 1.0 + wind_state);
  }

  ExogenousSeries s;
  s.timestep_hours = dt;
  s.demand_kw = demand_series(load);
  const double mean_demand = std::accumulate(s.demand_kw.begin(), s.demand_kw.end(), 0.0) / n;
  const double mean_solar = std::accumulate(solar.begin(), solar.end(), 0.0) / n;
  const double mean_wind = std::accumulate(wind.begin(), wind.end(), 0.0) / n;
  const double target = preset_renewable_ratio(preset) * mean_demand;
  const double share = mean_wind > 0.0 ? solar_share(preset) : 1.0;
  const double solar_scale = mean_solar > 0.0 ? share * target / mean_solar : 0.0;
  const double wind_scale = mean_wind > 0.0 ? (1.0 - share) * target / mean_wind : 0.0;
  s.solar_kw.resize(n);
  s.wind_kw.resize(n);
  s.grid_price_per_kwh.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.solar_kw[i] = solar[i] * solar_scale;
    s.wind_kw[i] = wind[i] * wind_scale;
    s.grid_price_per_kwh[i] = tariff(std::fmod(static_cast<double>(i) * dt, 24.0));
  }
  // Grid slack capped at 1.2x peak demand, except during evening stress
  // events where the feeder is limited to a fraction of the load.
  const double peak = *std::max_element(s.demand_kw.begin(), s.demand_kw.end());
  s.grid_cap_kw.assign(n, 1.2 * peak);
  Rng stress_rng(mix_seed(seed, 17));
  for (int d = 0; d < days; ++d) {
    if (stress_rng.uniform() >= kStressProbability) continue;
    for (std::size_t i = d * per_day; i < (d + 1) * per_day; ++i) {
      const double hour = std::fmod(static_cast<double>(i) * dt, 24.0);
      if (hour >= 18.0 && hour < 20.0) s.grid_cap_kw[i] = kStressCapFraction * s.demand_kw[i];
    }
  }
  s.storage_price_per_kwh = {0.38};
  s.emission_factor_kg_per_kwh = 0.4;
  return s;
}

Scenario make_scenario(Preset preset, int days, std::uint64_t seed, double dt) {
  Scenario sc;
  sc.label = preset_name(preset);
  sc.series = synthesize(preset, days, seed, dt);
  return sc;
}

std::vector<RawRecord> series_to_records(const ExogenousSeries& s, EpochSeconds start) {
  std::vector<RawRecord> out(s.size());
  const auto width = static_cast<EpochSeconds>(std::llround(s.timestep_hours * 3600.0));
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i].timestamp = start + static_cast<EpochSeconds>(i) * width;
    out[i].solar_kw = s.solar_kw[i];
    out[i].wind_kw = s.wind_kw[i];
    out[i].demand_kw = s.demand_kw[i];
    out[i].grid_price_per_kwh = s.grid_price_per_kwh[i];
  }
  return out;
}

ExogenousSeries records_to_series(std::span<const RawRecord> records, double dt) {
  ExogenousSeries s;
  s.timestep_hours = dt;
  for (const auto& r : records) {
    if (!r.solar_kw || !r.wind_kw || !r.demand_kw || !r.grid_price_per_kwh)
      throw TraceError("records_to_series: record at " + format_timestamp(r.timestamp) +
                       " has missing fields");
    s.solar_kw.push_back(*r.solar_kw);
    s.wind_kw.push_back(*r.wind_kw);
    s.demand_kw.push_back(*r.demand_kw);
    s.grid_price_per_kwh.push_back(*r.grid_price_per_kwh);
  }
  const double peak = s.demand_kw.empty() ? 0.0 : *std::max_element(s.demand_kw.begin(), s.demand_kw.end());
  s.grid_cap_kw.assign(s.size(), 1.2 * peak);
  return s;
}

}  // namespace greendc
