#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridwatch/data.hpp"

namespace gridwatch::forecast {

// Mean absolute percentage error, as a fraction. Throws on zero actuals.
double mape(std::span<const double> actual, std::span<const double> predicted);

// Load-weighted root error: sqrt(mean((a - p)^2 / a)). Dimensionally odd but
// reported alongside the conventional form for comparability.
double rmse_paper(std::span<const double> actual,
                  std::span<const double> predicted);

// Conventional sqrt(mean((a - p)^2)), in kW.
double rmse_standard(std::span<const double> actual,
                     std::span<const double> predicted);

struct ForecastReport {
  double mape = 0.0;
  double rmse_paper = 0.0;
  double rmse_standard = 0.0;
  std::vector<double> predictions;
};

ForecastReport evaluate_predictions(std::span<const double> actual,
                                    std::vector<double> predictions);

// Idealized forecaster: prediction_t = y_t * (1 + e_t), e_t ~ N(0, sigma).
// Decouples detection experiments from model training quality.
std::vector<double> oracle_forecast(const data::LoadSeries& series,
                                    double sigma, std::uint64_t seed);

// One-step-ahead forecaster consumed by the online detector. `t` is the
// absolute index into the underlying series, `window` the most recent
// accepted (or substituted) loads in kW, oldest first.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual double forecast(std::size_t t,
                          std::span<const double> window) const = 0;
  virtual std::size_t lookback() const = 0;
  virtual std::string_view tag() const = 0;
};

class OracleForecaster : public Forecaster {
 public:
  OracleForecaster(const data::LoadSeries& clean, double sigma,
                   std::uint64_t seed)
      : predictions_(oracle_forecast(clean, sigma, seed)) {}

  double forecast(std::size_t t, std::span<const double>) const override {
    return predictions_.at(t);
  }
  std::size_t lookback() const override { return 0; }
  std::string_view tag() const override { return "oracle"; }

 private:
  std::vector<double> predictions_;
};

}  // namespace gridwatch::forecast
