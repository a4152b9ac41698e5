#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace greendc {

class ForecastError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ForecastKind { persistence, seasonal_naive, autoregressive };

// Short-horizon renewable predictor. Immutable after fit.
struct ForecastModel {
  ForecastKind kind = ForecastKind::persistence;
  std::size_t order = 1;     // AR lags
  std::size_t period = 96;   // seasonal lag in steps (one day)
  std::vector<double> coefficients;  // lag 1 first
  double bias = 0.0;
  bool fell_back = false;    // AR fit was singular; behaves as persistence

  // Number of trailing history values `predict` needs.
  std::size_t required_history() const;
};

ForecastModel fit_forecast(ForecastKind kind, std::span<const double> series, std::size_t order = 4,
                           std::size_t period = 96);

// Predicts `horizon` steps following `history`. Outputs are clamped >= 0.
std::vector<double> predict(const ForecastModel& model, std::span<const double> history,
                            std::size_t horizon);

// Mean absolute error of rolling one-step-ahead forecasts over every index of
// `series` that has enough history.
double evaluate_mae(const ForecastModel& model, std::span<const double> series);

}  // namespace greendc
