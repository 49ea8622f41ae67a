#include "gridwatch/forecast.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace gridwatch::forecast {

namespace {

void check_lengths(std::span<const double> actual,
                   std::span<const double> predicted) {
  if (actual.size() != predicted.size()) {
    throw std::invalid_argument("actual/predicted length mismatch");
  }
  if (actual.empty()) throw std::invalid_argument("empty metric input");
}

}  // namespace

double mape(std::span<const double> actual, std::span<const double> predicted) {
  check_lengths(actual, predicted);
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] == 0.0) {
      throw std::invalid_argument("zero actual value at index " +
                                  std::to_string(i));
    }
    sum += std::abs(actual[i] - predicted[i]) / std::abs(actual[i]);
  }
  return sum / static_cast<double>(actual.size());
}

double rmse_paper(std::span<const double> actual,
                  std::span<const double> predicted) {
  check_lengths(actual, predicted);
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] == 0.0) {
      throw std::invalid_argument("zero actual value at index " +
                                  std::to_string(i));
    }
    const double d = actual[i] - predicted[i];
    sum += d * d / actual[i];
  }
  return std::sqrt(sum / static_cast<double>(actual.size()));
}

double rmse_standard(std::span<const double> actual,
                     std::span<const double> predicted) {
  check_lengths(actual, predicted);
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double d = actual[i] - predicted[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(actual.size()));
}

ForecastReport evaluate_predictions(std::span<const double> actual,
                                    std::vector<double> predictions) {
  ForecastReport report;
  report.mape = mape(actual, predictions);
  report.rmse_paper = rmse_paper(actual, predictions);
  report.rmse_standard = rmse_standard(actual, predictions);
  report.predictions = std::move(predictions);
  return report;
}

std::vector<double> oracle_forecast(const data::LoadSeries& series,
                                    double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("oracle sigma must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> predictions;
  predictions.reserve(series.size());
  for (double v : series.values) {
    predictions.push_back(v * (1.0 + sigma * gauss(rng)));
  }
  return predictions;
}

}  // namespace gridwatch::forecast
