#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gridwatch/data.hpp"
#include "gridwatch/forecast.hpp"
#include "gridwatch/robust.hpp"

namespace gridwatch::detect {

// |received - forecast| / forecast; the forecast must be positive.
double process_residual(double received, double forecast);

struct StepOutcome {
  std::size_t t = 0;  // absolute index into the underlying series
  data::HourStamp stamp = 0;
  double received = 0.0;
  double forecast = 0.0;
  double processed = 0.0;
  robust::Decision decision = robust::Decision::kInlier;
  double passed = 0.0;  // received if inlier, forecast if outlier

  bool flagged() const { return decision == robust::Decision::kOutlier; }
};

struct SubstitutionRecord {
  std::size_t t = 0;
  double received = 0.0;
  double forecast = 0.0;
};

struct DetectorConfig {
  std::size_t warmup_min = 168;   // minimum clean prefix for the initial fit
  std::size_t window = 168;       // trailing residual/decision window (one week)
  double contamination = 0.05;    // initial fit
  double c_min = 0.005;
  double c_max = 0.30;
  double refit_tolerance = 0.01;  // contamination change that forces a refit
  std::size_t refit_cadence = 24; // accepted points between routine refits
  // MCD support: high enough to keep the fit steady on one-sided residual
  // data, low enough that the subset can dodge a 30-percent attack plus
  // sampling noise.
  double support_fraction = 0.625;
  std::size_t envelope_dim = 1;   // residuals stacked into a d-vector
  // Online-refit contamination estimator: residuals above
  // refit_cutoff_sigmas times the warm-up residual scale count as
  // exceedances. The estimator's ceiling must stay above the worst-case
  // attacked fraction of a window, so it is separate from c_max.
  double refit_cutoff_sigmas = 3.0;
  double refit_c_max = 0.45;
  std::uint64_t seed = 0;
};

// Online detector: forecast, residual preprocessing, envelope decision,
// hourly contamination update, and forecast substitution for flagged points.
//
// The envelope is refit on the trailing window of *received* residuals
// (flagged ones included) so the decision quantile tracks the observed
// outlier rate; the refit contamination comes from the window's own
// chi-square exceedance count rather than past decisions, which stops false
// positives from feeding back into the quantile. The legitimate store keeps
// only accepted points.
class Detector {
 public:
  Detector(std::shared_ptr<const forecast::Forecaster> forecaster,
           DetectorConfig config, data::HourStamp series_start,
           std::size_t start_index,
           std::span<const double> window_seed_values = {});

  // Fits the initial envelope from a clean stream prefix; every prefix point
  // contributes one residual.
  void warm_up(std::span<const double> clean_prefix);

  StepOutcome step(double received);
  std::vector<StepOutcome> run_stream(std::span<const double> stream);

  bool warmed_up() const { return warmed_up_; }
  const robust::EnvelopeModel& envelope() const { return envelope_; }
  double contamination() const { return tracker_.value(); }
  const std::vector<SubstitutionRecord>& substitutions() const {
    return substitutions_;
  }
  std::size_t legitimate_count() const { return legit_residuals_.size(); }
  const std::vector<double>& legitimate_residuals() const {
    return legit_residuals_;
  }
  std::size_t refit_count() const { return refit_count_; }
  double exceedance_cutoff() const { return exceedance_cutoff_; }

 private:
  double forecast_next() const;
  void push_accepted(double value);
  void push_substituted(double forecast);
  void record_residual(double residual);
  Eigen::VectorXd feature_at_tail(double residual) const;
  Eigen::MatrixXd window_features() const;
  void refit(double tracker_value);

  std::shared_ptr<const forecast::Forecaster> forecaster_;
  DetectorConfig config_;
  data::HourStamp series_start_;
  std::size_t t_;
  std::deque<double> rolling_;  // model input window (substituted on outliers)
  std::deque<double> raw_residuals_;  // trailing received residuals, size <= window
  std::vector<double> legit_residuals_;
  std::vector<double> legit_loads_;
  robust::ContaminationTracker tracker_;
  robust::EnvelopeModel envelope_;
  std::vector<SubstitutionRecord> substitutions_;
  std::size_t accepted_since_fit_ = 0;
  double contamination_at_fit_ = 0.0;
  double exceedance_cutoff_ = 0.0;  // frozen at warm-up: sigmas * residual RMS
  std::size_t refit_count_ = 0;
  bool warmed_up_ = false;
};

void write_outcomes_csv(std::span<const StepOutcome> outcomes,
                        const std::string& path, const std::string& stamp_line);
void write_outcomes_jsonl(std::span<const StepOutcome> outcomes,
                          const std::string& path,
                          const std::string& config_hash,
                          const std::string& version);

}  // namespace gridwatch::detect
