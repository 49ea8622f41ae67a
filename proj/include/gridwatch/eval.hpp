#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gridwatch/attack.hpp"
#include "gridwatch/data.hpp"
#include "gridwatch/detect.hpp"
#include "gridwatch/forecast.hpp"

namespace gridwatch::eval {

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + tn + fp + fn; }
};

ConfusionMatrix confusion(const std::vector<bool>& truth,
                          const std::vector<bool>& flagged);

// Degenerate denominators leave the metric unset and excluded from means.
struct MetricSet {
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> f1;
};

MetricSet metrics(const ConfusionMatrix& cm);

// Arithmetic mean per metric over the repetitions where it is defined.
MetricSet mean_metrics(const std::vector<MetricSet>& sets);

// A detection pipeline variant under test: tag + forecaster factory. The
// factory receives the full clean series and a derived seed (used by the
// oracle; model-backed forecasters ignore it).
struct DetectorVariant {
  std::string tag;
  std::function<std::shared_ptr<const forecast::Forecaster>(
      const data::LoadSeries& clean, std::uint64_t seed)>
      make;
};

struct SuiteConfig {
  data::LoadSeries series;     // full clean series (train + test)
  std::size_t train_len = 0;   // split index into `series`
  std::size_t stream_len = 2000;
  std::size_t warmup_len = 168;
  double noise_sigma = 0.02;   // measurement noise on non-attacked points
  int repetitions = 3;
  std::uint64_t master_seed = 1;
  detect::DetectorConfig detector;
  int jobs = 1;
};

struct RepetitionResult {
  int repetition = 0;
  ConfusionMatrix cm;
  MetricSet metrics;
  std::size_t substitution_violations = 0;  // flagged values passed downstream
};

struct ScenarioResult {
  int scenario_id = 0;
  double dispersion_pct = 0.0;
  double intensity_pct = 0.0;
  std::string detector;
  std::vector<RepetitionResult> reps;
  MetricSet mean;
};

// Full grid execution: inject, add noise, warm up, stream, score; one result
// per (detector, scenario). Seeds derive from (master, detector, k,
// repetition) so that scenarios differing only in intensity share masks,
// noise and forecast errors. Runs are independent and may execute in
// parallel; aggregation order is fixed.
std::vector<ScenarioResult> run_suite(
    const SuiteConfig& config, const std::vector<DetectorVariant>& detectors,
    const std::vector<attack::AttackScenario>& scenarios);

struct RankingRow {
  std::string detector;
  int leading = 0;  // scenarios where this detector's mean f1 is maximal
  int rank = 0;     // competition ranking by leading count
};

// Leadership is judged on mean f1; ties award every tied detector.
std::vector<RankingRow> rank(const std::vector<ScenarioResult>& results);

// Report bundle: CSV per table, a JSON document with per-repetition detail,
// text tables, and a long-format CSV for plotting.
void write_suite_reports(const std::string& out_dir,
                         const std::vector<ScenarioResult>& results,
                         const std::string& config_json,
                         const std::string& config_hash);

}  // namespace gridwatch::eval
