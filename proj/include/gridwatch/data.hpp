#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gridwatch::data {

// Hours since 1970-01-01T00:00:00 (no timezone anywhere in the toolchain).
using HourStamp = std::int64_t;

// Strict ISO-8601 "YYYY-MM-DDTHH:MM:SS", hour resolution (MM and SS must be 00).
HourStamp parse_timestamp(std::string_view text);
std::string format_timestamp(HourStamp hour);

// CSV/row-level failure; `row` counts data rows from 1 (header excluded),
// 0 for file-level problems.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t row, const std::string& message)
      : std::runtime_error(message), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

// Contiguous hourly load readings, all finite and strictly positive.
struct LoadSeries {
  HourStamp start = 0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }
  HourStamp stamp_at(std::size_t i) const {
    return start + static_cast<HourStamp>(i);
  }
};

// Header `timestamp,load_kw`, one row per hour, '.' decimal separator.
LoadSeries load_csv(const std::string& path);
void write_csv(const LoadSeries& series, const std::string& path);

struct SynthProfile {
  double base_kw = 3000.0;
  double daily_amplitude = 0.25;   // fraction of base, peak mid-afternoon
  double weekly_amplitude = 0.10;  // weekday +amp, weekend -amp
  double noise_sigma = 0.01;       // Gaussian sigma as fraction of base
  HourStamp start = 341880;        // 2009-01-01T00:00:00
};

// 24*days hourly values; pure function of (days, seed, profile).
LoadSeries synth_load(int days, std::uint64_t seed,
                      const SynthProfile& profile = {});

// Affine min/max map onto [0,1]; degenerate ranges collapse to 0.5.
struct ScalingTransform {
  double lo = 0.0;
  double hi = 1.0;

  double scale(double v) const {
    const double range = hi - lo;
    return range > 0.0 ? (v - lo) / range : 0.5;
  }
  double unscale(double s) const {
    const double range = hi - lo;
    return range > 0.0 ? lo + s * range : lo;
  }
};

ScalingTransform fit_minmax(std::span<const double> values);

// Supervised one-step-ahead windows in scaled units.
struct WindowedDataset {
  std::size_t lookback = 0;
  std::vector<std::vector<double>> inputs;  // scaled, length == lookback
  std::vector<double> targets;              // scaled next-hour load
  ScalingTransform scaling;

  std::size_t size() const { return targets.size(); }
};

// Fits the scaling on `series` (training use) or applies an existing one
// (held-out evaluation).
WindowedDataset build_windows(const LoadSeries& series, std::size_t lookback);
WindowedDataset build_windows(const LoadSeries& series, std::size_t lookback,
                              const ScalingTransform& scaling);

struct SplitSpec {
  HourStamp train_end;  // exclusive
  HourStamp test_end;   // inclusive
};

// Disjoint contiguous partition: train [start, train_end), test [train_end, test_end].
std::pair<LoadSeries, LoadSeries> split(const LoadSeries& series,
                                        const SplitSpec& spec);

// Convenience: split at round(fraction * size).
SplitSpec fraction_split(const LoadSeries& series, double train_fraction);

}  // namespace gridwatch::data
