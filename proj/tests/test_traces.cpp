#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "greendc/traces.hpp"
#include "greendc/util.hpp"

using namespace greendc;

namespace {

RawRecord rec(EpochSeconds t, double solar, double wind, double demand, double price) {
  RawRecord r;
  r.timestamp = t;
  r.solar_kw = solar;
  r.wind_kw = wind;
  r.demand_kw = demand;
  r.grid_price_per_kwh = price;
  return r;
}

}  // namespace

TEST(Timestamp, KnownValues) {
  EXPECT_EQ(parse_timestamp("1970-01-01T00:00:00Z"), 0);
  EXPECT_EQ(parse_timestamp("2024-01-01T00:00:00Z"), 1704067200);
  EXPECT_EQ(parse_timestamp("2024-02-29 12:30"), 1704067200 + 59 * 86400 + 12 * 3600 + 30 * 60);
  EXPECT_EQ(format_timestamp(1704067200 + 3661), "2024-01-01T01:01:01Z");
  EXPECT_THROW(parse_timestamp("2023-02-29T00:00:00Z"), TraceError);
  EXPECT_THROW(parse_timestamp("yesterday"), TraceError);
}

TEST(Csv, RoundTripAndErrors) {
  std::vector<RawRecord> recs{rec(1704067200, 1.5, 2.0, 300.0, 0.12), rec(1704068100, 0.0, 3.25, 310.0, 0.7)};
  recs[1].soc_kwh = 500.0;
  const auto text = to_csv(recs);
  EXPECT_EQ(parse_csv(text), recs);
  EXPECT_THROW(parse_csv("timestamp,solar_kw,wind_kw,demand_kw\n"), TraceError);
  EXPECT_THROW(parse_csv("timestamp,solar_kw,wind_kw,demand_kw,grid_price_per_kwh,extra\n"), TraceError);
  try {
    parse_csv(std::string(kTraceHeader) + "\n2024-01-01T00:00:00Z,1,2,x,0.1\n");
    FAIL();
  } catch (const TraceError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Clean, DropsInvalidSortsAndDeduplicates) {
  std::vector<RawRecord> raw{rec(300, 1, 1, 10, 0.1), rec(0, 1, 1, 10, 0.1), rec(300, 9, 9, 90, 0.9),
                             rec(600, -1, 1, 10, 0.1)};
  raw.push_back(rec(900, 1, 1, 10, 0.1));
  raw.back().demand_kw.reset();
  const auto out = clean(raw);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].timestamp, 0);
  EXPECT_EQ(out[1].timestamp, 300);
  EXPECT_EQ(*out[1].solar_kw, 1.0);  // first duplicate kept
}

TEST(Clean, WinsorizesOutliersToFixedPoint) {
  std::vector<RawRecord> raw;
  for (int i = 0; i < 200; ++i) raw.push_back(rec(i * 900, 1.0 + (i % 7) * 0.1, 2.0, 300.0 + (i % 5), 0.1));
  raw[50].demand_kw = 1e6;
  const auto out = clean(raw);
  EXPECT_TRUE(out[50].quality & quality_winsorized);
  std::vector<double> d;
  for (const auto& r : out) d.push_back(*r.demand_kw);
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / d.size();
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / d.size());
  for (double x : d) EXPECT_LE(std::abs(x - mean), 5.0 * sd + 1e-9 * std::max(1.0, std::abs(mean) + sd));
  EXPECT_EQ(clean(out), out);
}

TEST(Winsorize, SinglePassClamps) {
  const std::vector<double> v{0, 0, 0, 0, 100};
  const auto w = winsorize(v, 1.0);
  // mean 20, sd 40 -> clamp to [-20, 60]
  EXPECT_DOUBLE_EQ(w[4], 60.0);
  EXPECT_DOUBLE_EQ(w[0], 0.0);
}

TEST(Normalize, RangeAndRoundTrip) {
  Rng rng(4);
  for (int i = 0; i < 10000; ++i) {
    const double a = (rng.uniform() - 0.5) * 1e4, b = a + rng.uniform() * 1e3 + 1e-6;
    const FeatureRange r{a, b};
    const double x = a + rng.uniform() * (b - a);
    const double n = minmax_normalize(x, r);
    EXPECT_GE(n, 0.0);
    EXPECT_LE(n, 1.0);
    EXPECT_NEAR(denormalize(n, r), x, 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}));
  }
  EXPECT_EQ(minmax_normalize(5.0, {5.0, 5.0}), 0.0);
  EXPECT_EQ(denormalize(0.3, {5.0, 5.0}), 5.0);
}

TEST(TimeEncoding, QuarterDays) {
  const auto midnight = encode_time(1704067200);
  EXPECT_NEAR(midnight.sin, 0.0, 1e-12);
  EXPECT_NEAR(midnight.cos, 1.0, 1e-12);
  const auto six = encode_time(1704067200 + 6 * 3600);
  EXPECT_NEAR(six.sin, 1.0, 1e-12);
  EXPECT_NEAR(six.cos, 0.0, 1e-12);
}

TEST(Aggregate, MeansPerInterval) {
  std::vector<RawRecord> raw;
  for (int i = 0; i < 6; ++i) raw.push_back(rec(i * 300, i, 0, 100 + i, 0.1));
  const auto out = aggregate(raw, 0.25);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_DOUBLE_EQ(*out[0].solar_kw, 1.0);
  EXPECT_DOUBLE_EQ(*out[1].demand_kw, 104.0);
}

TEST(Aggregate, PartialBoundaryBinsStayWithinSlack) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RawRecord> raw;
    double raw_energy = 0.0, peak = 0.0;
    const int n = 20 + static_cast<int>(rng.below(300));
    const EpochSeconds start = 60 * static_cast<EpochSeconds>(rng.below(15));
    for (int i = 0; i < n; ++i) {
      const double d = 200.0 + 100.0 * rng.uniform();
      raw.push_back(rec(start + i * 300, 0, 0, d, 0.1));
      raw_energy += d * 300.0 / 3600.0;
      peak = std::max(peak, d);
    }
    const auto agg = aggregate(raw, 0.25);
    double agg_energy = 0.0;
    for (const auto& r : agg) agg_energy += *r.demand_kw * 0.25;
    EXPECT_LE(std::abs(raw_energy - agg_energy), peak * 0.25) << "trial " << trial;
  }
}

TEST(Aggregate, EmptyIntervalsRepeatThePrevious) {
  // 5-minute sampling with a 40-minute hole.
  std::vector<RawRecord> raw{rec(0, 1, 1, 100, 0.1), rec(300, 1, 1, 100, 0.1), rec(2700, 1, 1, 300, 0.1)};
  const auto out = aggregate(raw, 0.25);
  ASSERT_EQ(out.size(), 4u);
  EXPECT_DOUBLE_EQ(*out[1].demand_kw, 100.0);
  EXPECT_TRUE(out[2].quality & quality_filled);
  EXPECT_DOUBLE_EQ(*out[3].demand_kw, 300.0);
}

TEST(Aggregate, FullBinsPreserveEnergyExactly) {
  std::vector<RawRecord> raw;
  double raw_energy = 0.0, peak = 0.0;
  Rng rng(2);
  for (int i = 0; i < 96 * 3; ++i) {
    const double d = 100.0 + 50.0 * rng.uniform();
    raw.push_back(rec(i * 300, 0, 0, d, 0.1));
    raw_energy += d * 300.0 / 3600.0;
    peak = std::max(peak, d);
  }
  double agg_energy = 0.0;
  for (const auto& r : aggregate(raw, 0.25)) agg_energy += *r.demand_kw * 0.25;
  EXPECT_LE(std::abs(raw_energy - agg_energy), peak * 0.25);
  EXPECT_NEAR(raw_energy, agg_energy, 1e-9 * raw_energy);
}

TEST(Integrate, InnerJoinAndNormalizedBounds) {
  std::vector<RawRecord> a, b;
  for (int i = 0; i < 8; ++i) {
    RawRecord x;
    x.timestamp = i * 900;
    x.solar_kw = i;
    x.wind_kw = 2 * i;
    a.push_back(x);
  }
  for (int i = 2; i < 10; ++i) {
    RawRecord y;
    y.timestamp = i * 900;
    y.demand_kw = 100 + i;
    y.grid_price_per_kwh = 0.1 * i;
    b.push_back(y);
  }
  std::vector<std::vector<RawRecord>> streams{a, b};
  const auto data = integrate(streams, 0.25);
  ASSERT_EQ(data.records.size(), 6u);
  EXPECT_EQ(data.records[0].timestamp, 1800);
  EXPECT_DOUBLE_EQ(data.records[0].raw[static_cast<std::size_t>(Feature::renewable)], 6.0);
  for (const auto& r : data.records)
    for (double v : r.normalized) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  EXPECT_FALSE(data.has_soc);
}

TEST(Preprocess, SyntheticPipelineIsDeterministic) {
  const auto records = series_to_records(synthesize(Preset::mixed, 2, 3));
  const auto a = unified_to_csv(preprocess(records, 0.25));
  const auto b = unified_to_csv(preprocess(records, 0.25));
  EXPECT_EQ(a, b);
  EXPECT_EQ(preprocess(records, 0.25).records.size(), 192u);
}

TEST(Synthesize, PresetRenewableRatios) {
  for (auto p : {Preset::high, Preset::low, Preset::mixed}) {
    const auto s = synthesize(p, 7, 1);
    ASSERT_EQ(s.size(), 672u);
    double ren = 0.0, dem = 0.0;
    for (std::size_t t = 0; t < s.size(); ++t) {
      ren += renewable_at(s, t);
      dem += s.demand_kw[t];
    }
    EXPECT_NEAR(ren / dem, preset_renewable_ratio(p), 1e-9);
    EXPECT_NO_THROW(s.validate());
  }
  EXPECT_EQ(to_csv(series_to_records(synthesize(Preset::low, 1, 4))),
            to_csv(series_to_records(synthesize(Preset::low, 1, 4))));
  EXPECT_THROW(parse_preset("medium"), TraceError);
}

TEST(Synthesize, RecordsRoundTripToSeries) {
  const auto s = synthesize(Preset::high, 1, 2);
  const auto back = records_to_series(series_to_records(s), 0.25);
  EXPECT_EQ(back.demand_kw, s.demand_kw);
  EXPECT_EQ(back.solar_kw, s.solar_kw);
  EXPECT_EQ(back.grid_price_per_kwh, s.grid_price_per_kwh);
}
