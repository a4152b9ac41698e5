#include <gtest/gtest.h>

#include <cmath>

#include "greendc/forecast.hpp"
#include "greendc/util.hpp"

using namespace greendc;

TEST(Forecast, PersistenceRepeatsLastValue) {
  const std::vector<double> h{1.0, 2.0, 3.5};
  const auto m = fit_forecast(ForecastKind::persistence, h);
  EXPECT_EQ(predict(m, h, 3), (std::vector<double>{3.5, 3.5, 3.5}));
  EXPECT_TRUE(predict(m, h, 0).empty());
}

TEST(Forecast, SeasonalNaiveRepeatsPeriod) {
  std::vector<double> h;
  for (int i = 0; i < 8; ++i) h.push_back(i % 4);
  const auto m = fit_forecast(ForecastKind::seasonal_naive, h, 4, 4);
  EXPECT_EQ(predict(m, h, 6), (std::vector<double>{0, 1, 2, 3, 0, 1}));
  EXPECT_THROW(fit_forecast(ForecastKind::seasonal_naive, std::vector<double>{1, 2}, 4, 4), ForecastError);
}

TEST(Forecast, ArRecoversKnownProcess) {
  // y_t = 2 + 0.6 y_{t-1} - 0.2 y_{t-2} + noise
  Rng rng(5);
  std::vector<double> y{5.0, 5.0};
  for (int t = 2; t < 20000; ++t) y.push_back(2.0 + 0.6 * y[t - 1] - 0.2 * y[t - 2] + 0.1 * rng.normal());
  const auto m = fit_forecast(ForecastKind::autoregressive, y, 2);
  ASSERT_FALSE(m.fell_back);
  EXPECT_NEAR(m.bias, 2.0, 0.05);
  EXPECT_NEAR(m.coefficients[0], 0.6, 0.02);
  EXPECT_NEAR(m.coefficients[1], -0.2, 0.02);
  // Multi-step prediction iterates the recursion.
  const std::vector<double> hist{4.0, 3.0};
  const auto p = predict(m, hist, 2);
  const double p1 = m.bias + m.coefficients[0] * 3.0 + m.coefficients[1] * 4.0;
  EXPECT_NEAR(p[0], p1, 1e-12);
  EXPECT_NEAR(p[1], m.bias + m.coefficients[0] * p1 + m.coefficients[1] * 3.0, 1e-12);
}

TEST(Forecast, ConstantSeriesFallsBackToPersistence) {
  const std::vector<double> flat(50, 3.0);
  const auto m = fit_forecast(ForecastKind::autoregressive, flat, 4);
  EXPECT_TRUE(m.fell_back);
  EXPECT_EQ(predict(m, flat, 2), (std::vector<double>{3.0, 3.0}));
}

TEST(Forecast, OutputsClampedNonNegative) {
  std::vector<double> y;
  for (int i = 0; i < 100; ++i) y.push_back(i % 2 ? 10.0 : 0.0);
  const auto m = fit_forecast(ForecastKind::autoregressive, y, 1);
  for (double v : predict(m, std::vector<double>{10.0, 20.0}, 5)) EXPECT_GE(v, 0.0);
}

TEST(Forecast, Errors) {
  EXPECT_THROW(fit_forecast(ForecastKind::autoregressive, std::vector<double>{1, 2, 3}, 4), ForecastError);
  EXPECT_THROW(fit_forecast(ForecastKind::autoregressive, std::vector<double>{1, 2, 3}, 0), ForecastError);
  EXPECT_THROW(fit_forecast(ForecastKind::persistence, std::vector<double>{}), ForecastError);
  const auto m = fit_forecast(ForecastKind::autoregressive, std::vector<double>{1, 3, 2, 5, 4, 6, 5, 8}, 3);
  EXPECT_THROW(predict(m, std::vector<double>{1.0}, 1), ForecastError);
}

TEST(Forecast, MaeMatchesManualRollingErrors) {
  const std::vector<double> y{1, 4, 2, 8, 5};
  const auto m = fit_forecast(ForecastKind::persistence, y);
  // |4-1| + |2-4| + |8-2| + |5-8| over 4 forecasts
  EXPECT_DOUBLE_EQ(evaluate_mae(m, y), (3.0 + 2.0 + 6.0 + 3.0) / 4.0);
}
