#include "gridwatch/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace gridwatch::data {

namespace {

// Days-from-civil / civil-from-days (proleptic Gregorian), era-based.
std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int yr = static_cast<int>(yoe) + static_cast<int>(era) * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = yr + (m <= 2);
}

bool parse_int(std::string_view s, int& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

}  // namespace

HourStamp parse_timestamp(std::string_view text) {
  // YYYY-MM-DDTHH:MM:SS
  if (text.size() != 19 || text[4] != '-' || text[7] != '-' ||
      text[10] != 'T' || text[13] != ':' || text[16] != ':') {
    throw std::invalid_argument("malformed timestamp '" + std::string(text) +
                                "'");
  }
  int y, mo, da, hh, mi, ss;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), mo) ||
      !parse_int(text.substr(8, 2), da) || !parse_int(text.substr(11, 2), hh) ||
      !parse_int(text.substr(14, 2), mi) || !parse_int(text.substr(17, 2), ss)) {
    throw std::invalid_argument("malformed timestamp '" + std::string(text) +
                                "'");
  }
  if (mo < 1 || mo > 12 || da < 1 || da > 31 || hh < 0 || hh > 23) {
    throw std::invalid_argument("timestamp fields out of range in '" +
                                std::string(text) + "'");
  }
  if (mi != 0 || ss != 0) {
    throw std::invalid_argument("timestamp '" + std::string(text) +
                                "' is not hour-aligned");
  }
  return days_from_civil(y, static_cast<unsigned>(mo),
                         static_cast<unsigned>(da)) *
             24 +
         hh;
}

std::string format_timestamp(HourStamp hour) {
  std::int64_t days = hour / 24;
  int hh = static_cast<int>(hour % 24);
  if (hh < 0) {
    hh += 24;
    days -= 1;
  }
  int y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:00:00", y, m, d, hh);
  return buf;
}

LoadSeries load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw ParseError(0, "empty file '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "timestamp,load_kw") {
    throw ParseError(0, "expected header 'timestamp,load_kw', got '" + line +
                            "'");
  }

  LoadSeries series;
  std::size_t row = 0;
  HourStamp prev = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ParseError(row, "missing comma at row " + std::to_string(row));
    }
    HourStamp stamp;
    try {
      stamp = parse_timestamp(std::string_view(line).substr(0, comma));
    } catch (const std::invalid_argument& e) {
      throw ParseError(row, std::string(e.what()) + " at row " +
                                std::to_string(row));
    }
    const std::string_view value_text = std::string_view(line).substr(comma + 1);
    double value = 0.0;
    auto [p, ec] =
        std::from_chars(value_text.data(), value_text.data() + value_text.size(),
                        value);
    if (ec != std::errc{} || p != value_text.data() + value_text.size() ||
        !std::isfinite(value)) {
      throw ParseError(row, "non-numeric load at row " + std::to_string(row));
    }
    if (value <= 0.0) {
      throw ParseError(row, "non-positive load at row " + std::to_string(row));
    }
    if (series.empty()) {
      series.start = stamp;
    } else if (stamp <= prev) {
      throw ParseError(row, "non-monotone timestamp at row " +
                                std::to_string(row));
    } else if (stamp != prev + 1) {
      throw ParseError(row, "gapped timestamp at row " + std::to_string(row));
    }
    prev = stamp;
    series.values.push_back(value);
  }
  return series;
}

void write_csv(const LoadSeries& series, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "timestamp,load_kw\n";
  char buf[64];
  for (std::size_t i = 0; i < series.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.6f", series.values[i]);
    out << format_timestamp(series.stamp_at(i)) << ',' << buf << '\n';
  }
}

LoadSeries synth_load(int days, std::uint64_t seed,
                      const SynthProfile& profile) {
  if (days < 2) throw std::invalid_argument("synth_load requires days >= 2");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  LoadSeries series;
  series.start = profile.start;
  const int hours = days * 24;
  series.values.reserve(static_cast<std::size_t>(hours));
  constexpr double kTwoPi = 6.283185307179586476925286766559;

  for (int h = 0; h < hours; ++h) {
    const HourStamp stamp = profile.start + h;
    const int hour_of_day = static_cast<int>(((stamp % 24) + 24) % 24);
    // 1970-01-01 was a Thursday; encode 0=Sunday..6=Saturday.
    const std::int64_t day_index =
        (stamp >= 0 ? stamp : stamp - 23) / 24;
    const int dow = static_cast<int>(((day_index + 4) % 7 + 7) % 7);
    const bool weekend = dow == 0 || dow == 6;

    const double daily =
        std::sin(kTwoPi * (hour_of_day - 9) / 24.0);  // peaks at 15:00
    const double weekly =
        weekend ? 1.0 - profile.weekly_amplitude : 1.0 + profile.weekly_amplitude;
    const double level =
        profile.base_kw * (1.0 + profile.daily_amplitude * daily) * weekly;
    const double v =
        level + profile.base_kw * profile.noise_sigma * noise(rng);
    if (!(v > 0.0)) {
      throw std::invalid_argument(
          "synth profile produced a non-positive load at hour " +
          std::to_string(h));
    }
    series.values.push_back(v);
  }
  return series;
}

ScalingTransform fit_minmax(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("cannot fit scaling on empty data");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  return ScalingTransform{*lo_it, *hi_it};
}

WindowedDataset build_windows(const LoadSeries& series, std::size_t lookback) {
  if (series.size() <= lookback) {
    throw std::invalid_argument("series too short for lookback " +
                                std::to_string(lookback));
  }
  return build_windows(series, lookback, fit_minmax(series.values));
}

WindowedDataset build_windows(const LoadSeries& series, std::size_t lookback,
                              const ScalingTransform& scaling) {
  if (lookback == 0) throw std::invalid_argument("lookback must be positive");
  if (series.size() <= lookback) {
    throw std::invalid_argument("series too short for lookback " +
                                std::to_string(lookback));
  }
  WindowedDataset ds;
  ds.lookback = lookback;
  ds.scaling = scaling;
  const std::size_t pairs = series.size() - lookback;
  ds.inputs.reserve(pairs);
  ds.targets.reserve(pairs);
  for (std::size_t i = 0; i < pairs; ++i) {
    std::vector<double> window(lookback);
    for (std::size_t j = 0; j < lookback; ++j) {
      window[j] = scaling.scale(series.values[i + j]);
    }
    ds.inputs.push_back(std::move(window));
    ds.targets.push_back(scaling.scale(series.values[i + lookback]));
  }
  return ds;
}

std::pair<LoadSeries, LoadSeries> split(const LoadSeries& series,
                                        const SplitSpec& spec) {
  if (series.empty()) throw std::invalid_argument("cannot split empty series");
  const HourStamp first = series.start;
  const HourStamp last = series.stamp_at(series.size() - 1);
  if (!(first < spec.train_end && spec.train_end < spec.test_end)) {
    throw std::invalid_argument("split requires start < train_end < test_end");
  }
  if (spec.train_end > last || spec.test_end > last) {
    throw std::invalid_argument("split timestamps outside the series");
  }
  const auto train_len = static_cast<std::size_t>(spec.train_end - first);
  const auto test_len = static_cast<std::size_t>(spec.test_end - spec.train_end) + 1;

  LoadSeries train;
  train.start = first;
  train.values.assign(series.values.begin(),
                      series.values.begin() + static_cast<std::ptrdiff_t>(train_len));
  LoadSeries test;
  test.start = spec.train_end;
  test.values.assign(series.values.begin() + static_cast<std::ptrdiff_t>(train_len),
                     series.values.begin() +
                         static_cast<std::ptrdiff_t>(train_len + test_len));
  return {std::move(train), std::move(test)};
}

SplitSpec fraction_split(const LoadSeries& series, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must be in (0,1)");
  }
  const auto n = static_cast<double>(series.size());
  const auto train_len =
      static_cast<HourStamp>(std::llround(train_fraction * n));
  return SplitSpec{series.start + train_len,
                   series.stamp_at(series.size() - 1)};
}

}  // namespace gridwatch::data
