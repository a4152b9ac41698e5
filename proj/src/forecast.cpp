#include "greendc/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace greendc {

std::size_t ForecastModel::required_history() const {
  switch (kind) {
    case ForecastKind::persistence: return 1;
    case ForecastKind::seasonal_naive: return period;
    case ForecastKind::autoregressive: return order;
  }
  return 1;
}

namespace {

// Solves A x = b in place with partial pivoting. Returns false when a pivot
// falls below `tol` relative to the largest diagonal entry.
bool solve_linear(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a[i * n + i]));
  const double tol = 1e-10 * std::max(scale, 1e-300);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    if (std::abs(a[piv * n + col]) <= tol) return false;
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / a[col * n + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i * n + c] * b[c];
    b[i] = s / a[i * n + i];
  }
  return true;
}

ForecastModel persistence_fallback(std::size_t order) {
  ForecastModel m;
  m.kind = ForecastKind::persistence;
  m.order = order;
  m.coefficients.assign(order, 0.0);
  m.coefficients[0] = 1.0;
  m.fell_back = true;
  return m;
}

}  // namespace

ForecastModel fit_forecast(ForecastKind kind, std::span<const double> series, std::size_t order,
                           std::size_t period) {
  ForecastModel m;
  m.kind = kind;
  m.period = period;
  switch (kind) {
    case ForecastKind::persistence:
      if (series.empty()) throw ForecastError("persistence fit needs at least one value");
      return m;
    case ForecastKind::seasonal_naive:
      if (period == 0) throw ForecastError("seasonal period must be positive");
      if (series.size() <= period)
        throw ForecastError("seasonal fit needs more than one period of history");
      return m;
    case ForecastKind::autoregressive: break;
  }
  if (order == 0) throw ForecastError("AR order must be >= 1");
  if (series.size() <= order)
    throw ForecastError("AR(" + std::to_string(order) + ") fit needs more than " +
                        std::to_string(order) + " values");
  m.order = order;

  // Normal equations for y_t = bias + sum_k a_k y_{t-k}; unknowns [bias, a_1..a_p].
  const std::size_t n = order + 1;
  std::vector<double> ata(n * n, 0.0), aty(n, 0.0), row(n);
  for (std::size_t t = order; t < series.size(); ++t) {
    row[0] = 1.0;
    for (std::size_t k = 1; k <= order; ++k) row[k] = series[t - k];
    for (std::size_t i = 0; i < n; ++i) {
      aty[i] += row[i] * series[t];
      for (std::size_t j = 0; j < n; ++j) ata[i * n + j] += row[i] * row[j];
    }
  }
  if (!solve_linear(ata, aty, n)) return persistence_fallback(order);
  if (!std::all_of(aty.begin(), aty.end(), [](double v) { return std::isfinite(v); }))
    return persistence_fallback(order);
  m.bias = aty[0];
  m.coefficients.assign(aty.begin() + 1, aty.end());
  return m;
}

std::vector<double> predict(const ForecastModel& m, std::span<const double> history,
                            std::size_t horizon) {
  std::vector<double> out;
  out.reserve(horizon);
  if (horizon == 0) return out;
  const std::size_t need = m.required_history();
  if (history.size() < need)
    throw ForecastError("predict: history of " + std::to_string(history.size()) +
                        " values, model needs " + std::to_string(need));
  switch (m.kind) {
    case ForecastKind::persistence:
      out.assign(horizon, std::max(0.0, history.back()));
      break;
    case ForecastKind::seasonal_naive:
      for (std::size_t h = 0; h < horizon; ++h) {
        // Same phase one period earlier; beyond one period reuse forecasts.
        const std::size_t back = m.period;
        const std::size_t idx = history.size() + h;  // position being forecast
        const double v = h < back ? history[idx - back] : out[h - back];
        out.push_back(std::max(0.0, v));
      }
      break;
    case ForecastKind::autoregressive: {
      std::vector<double> window(history.end() - static_cast<std::ptrdiff_t>(m.order), history.end());
      for (std::size_t h = 0; h < horizon; ++h) {
        double y = m.bias;
        for (std::size_t k = 0; k < m.order; ++k) y += m.coefficients[k] * window[window.size() - 1 - k];
        y = std::max(0.0, y);
        out.push_back(y);
        window.erase(window.begin());
        window.push_back(y);
      }
      break;
    }
  }
  return out;
}

double evaluate_mae(const ForecastModel& m, std::span<const double> series) {
  const std::size_t start = m.required_history();
  if (series.size() <= start) throw ForecastError("evaluate_mae: not enough held-out data");
  double total = 0.0;
  for (std::size_t t = start; t < series.size(); ++t) {
    const double p = predict(m, series.first(t), 1).front();
    total += std::abs(p - series[t]);
  }
  return total / static_cast<double>(series.size() - start);
}

}  // namespace greendc
