#include "gridwatch/attack.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace gridwatch::attack {

std::vector<AttackScenario> scenario_grid() {
  std::vector<AttackScenario> grid;
  grid.reserve(30);
  int id = 1;
  for (double sign : {-1.0, +1.0}) {
    for (double k : {10.0, 20.0, 30.0}) {
      for (double p = 10.0; p <= 50.0; p += 10.0) {
        grid.push_back(AttackScenario{id++, k, sign * p, 0});
      }
    }
  }
  return grid;
}

AttackScenario scenario_by_id(int id, std::uint64_t seed) {
  if (id < 1 || id > 30) {
    throw std::invalid_argument("scenario id must be in [1, 30]");
  }
  AttackScenario s = scenario_grid()[static_cast<std::size_t>(id - 1)];
  s.seed = seed;
  return s;
}

std::size_t LabeledSeries::attacked_count() const {
  return static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), true));
}

LabeledSeries inject(const data::LoadSeries& series,
                     const AttackScenario& scenario) {
  if (series.empty()) throw std::invalid_argument("cannot attack empty series");
  const std::size_t n = series.size();
  const auto count = static_cast<std::size_t>(
      std::llround(scenario.dispersion_pct / 100.0 * static_cast<double>(n)));
  if (count == 0) {
    throw std::invalid_argument("scenario degenerate for series length " +
                                std::to_string(n));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(scenario.seed);
  for (std::size_t j = 0; j < count; ++j) {
    std::uniform_int_distribution<std::size_t> pick(j, n - 1);
    std::swap(order[j], order[pick(rng)]);
  }

  LabeledSeries out;
  out.clean = series;
  out.values = series;
  out.labels.assign(n, false);
  const double factor = 1.0 + scenario.intensity_pct / 100.0;
  for (std::size_t j = 0; j < count; ++j) {
    out.labels[order[j]] = true;
    out.values.values[order[j]] = series.values[order[j]] * factor;
  }
  return out;
}

data::LoadSeries add_measurement_noise(const data::LoadSeries& series,
                                       double sigma, std::uint64_t seed,
                                       const std::vector<bool>& exclude) {
  if (sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
  if (!exclude.empty() && exclude.size() != series.size()) {
    throw std::invalid_argument("exclusion mask length mismatch");
  }
  data::LoadSeries noisy = series;
  if (sigma == 0.0) return noisy;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    if (!exclude.empty() && exclude[i]) continue;
    noisy.values[i] *= 1.0 + gauss(rng);
  }
  return noisy;
}

void write_labeled_csv(const LabeledSeries& labeled, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "timestamp,load_kw,label\n";
  char buf[64];
  for (std::size_t i = 0; i < labeled.values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.6f,%d", labeled.values.values[i],
                  labeled.labels[i] ? 1 : 0);
    out << data::format_timestamp(labeled.values.stamp_at(i)) << ',' << buf
        << '\n';
  }
}

LabeledSeries load_labeled_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data::ParseError(0, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw data::ParseError(0, "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "timestamp,load_kw,label") {
    throw data::ParseError(0, "expected header 'timestamp,load_kw,label'");
  }
  LabeledSeries out;
  std::size_t row = 0;
  data::HourStamp prev = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos
                                            : line.find(',', c1 + 1);
    if (c2 == std::string::npos) {
      throw data::ParseError(row, "expected 3 fields at row " +
                                      std::to_string(row));
    }
    const data::HourStamp stamp =
        data::parse_timestamp(std::string_view(line).substr(0, c1));
    const std::string_view value_text =
        std::string_view(line).substr(c1 + 1, c2 - c1 - 1);
    double value = 0.0;
    auto [p, ec] =
        std::from_chars(value_text.data(),
                        value_text.data() + value_text.size(), value);
    if (ec != std::errc{} || p != value_text.data() + value_text.size()) {
      throw data::ParseError(row, "non-numeric load at row " +
                                      std::to_string(row));
    }
    const std::string_view label_text = std::string_view(line).substr(c2 + 1);
    if (label_text != "0" && label_text != "1") {
      throw data::ParseError(row, "label must be 0 or 1 at row " +
                                      std::to_string(row));
    }
    if (out.values.empty()) {
      out.values.start = stamp;
    } else if (stamp != prev + 1) {
      throw data::ParseError(row, "non-contiguous timestamp at row " +
                                      std::to_string(row));
    }
    prev = stamp;
    out.values.values.push_back(value);
    out.labels.push_back(label_text == "1");
  }
  out.clean = out.values;  // clean originals are not recoverable from the file
  return out;
}

}  // namespace gridwatch::attack
