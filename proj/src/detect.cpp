#include "gridwatch/detect.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "gridwatch/seeding.hpp"

namespace gridwatch::detect {

double process_residual(double received, double forecast) {
  if (!(forecast > 0.0)) {
    throw std::invalid_argument("non-positive forecast in residual");
  }
  return std::abs(received - forecast) / forecast;
}

Detector::Detector(std::shared_ptr<const forecast::Forecaster> forecaster,
                   DetectorConfig config, data::HourStamp series_start,
                   std::size_t start_index,
                   std::span<const double> window_seed_values)
    : forecaster_(std::move(forecaster)),
      config_(config),
      series_start_(series_start),
      t_(start_index),
      tracker_(config.window, config.c_min, config.c_max, config.c_min) {
  if (!forecaster_) throw std::invalid_argument("detector needs a forecaster");
  if (config_.envelope_dim == 0) {
    throw std::invalid_argument("envelope_dim must be >= 1");
  }
  for (double v : window_seed_values) rolling_.push_back(v);
}

double Detector::forecast_next() const {
  std::vector<double> window(rolling_.begin(), rolling_.end());
  return forecaster_->forecast(t_, window);
}

void Detector::push_accepted(double value) {
  rolling_.push_back(value);
  const std::size_t cap = std::max<std::size_t>(forecaster_->lookback(), 1);
  while (rolling_.size() > cap) rolling_.pop_front();
}

void Detector::push_substituted(double forecast) { push_accepted(forecast); }

void Detector::record_residual(double residual) {
  raw_residuals_.push_back(residual);
  while (raw_residuals_.size() > config_.window) raw_residuals_.pop_front();
}

Eigen::VectorXd Detector::feature_at_tail(double residual) const {
  const auto d = static_cast<Eigen::Index>(config_.envelope_dim);
  Eigen::VectorXd x(d);
  x(d - 1) = residual;
  // Older residuals fill the leading coordinates; duplicated at the edge
  // when history is short.
  for (Eigen::Index j = d - 2; j >= 0; --j) {
    const auto back = static_cast<std::size_t>(d - 2 - j);
    if (back < raw_residuals_.size()) {
      x(j) = raw_residuals_[raw_residuals_.size() - 1 - back];
    } else {
      x(j) = raw_residuals_.empty() ? residual : raw_residuals_.front();
    }
  }
  return x;
}

Eigen::MatrixXd Detector::window_features() const {
  const auto d = static_cast<Eigen::Index>(config_.envelope_dim);
  const auto n = static_cast<Eigen::Index>(raw_residuals_.size());
  const Eigen::Index rows = n - d + 1;
  if (rows < d + 1) return Eigen::MatrixXd();
  Eigen::MatrixXd train(rows, d);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      train(i, j) = raw_residuals_[static_cast<std::size_t>(i + j)];
    }
  }
  return train;
}

void Detector::refit(double tracker_value) {
  const Eigen::MatrixXd train = window_features();
  if (train.rows() == 0) return;  // not enough material yet; keep the old fit
  envelope_ = robust::fit_envelope_adaptive(
      train, exceedance_cutoff_, config_.c_min, config_.refit_c_max,
      config_.support_fraction, derive_seed(config_.seed, "refit", refit_count_));
  contamination_at_fit_ = tracker_value;
  accepted_since_fit_ = 0;
  ++refit_count_;
}

void Detector::warm_up(std::span<const double> clean_prefix) {
  if (clean_prefix.size() < config_.warmup_min) {
    throw std::invalid_argument("warm-up prefix shorter than " +
                                std::to_string(config_.warmup_min));
  }
  double residual_sumsq = 0.0;
  for (double received : clean_prefix) {
    const double predicted = forecast_next();
    const double residual = process_residual(received, predicted);
    record_residual(residual);
    legit_residuals_.push_back(residual);
    legit_loads_.push_back(received);
    residual_sumsq += residual * residual;
    tracker_.update(robust::Decision::kInlier);
    push_accepted(received);
    ++t_;
  }
  // Clean-sample residual scale, frozen: |relative error| second moment.
  exceedance_cutoff_ =
      config_.refit_cutoff_sigmas *
      std::sqrt(residual_sumsq / static_cast<double>(clean_prefix.size()));
  const Eigen::MatrixXd train = window_features();
  if (train.rows() == 0) {
    throw std::invalid_argument("warm-up prefix too short for envelope fit");
  }
  envelope_ = robust::fit_envelope(
      train, config_.contamination, config_.support_fraction,
      derive_seed(config_.seed, "refit", refit_count_));
  contamination_at_fit_ = config_.contamination;
  ++refit_count_;
  // The clean prefix leaves the tracker at its floor; that already exceeds
  // the refit tolerance relative to the default-contamination fit.
  if (std::abs(tracker_.value() - contamination_at_fit_) >
      config_.refit_tolerance) {
    refit(tracker_.value());
  }
  warmed_up_ = true;
}

StepOutcome Detector::step(double received) {
  if (!warmed_up_) throw std::logic_error("detector not warmed up");

  StepOutcome out;
  out.t = t_;
  out.stamp = series_start_ + static_cast<data::HourStamp>(t_);
  out.received = received;
  out.forecast = forecast_next();
  out.processed = process_residual(received, out.forecast);
  out.decision = robust::decide(envelope_, feature_at_tail(out.processed));

  record_residual(out.processed);
  const double contamination = tracker_.update(out.decision);

  if (out.decision == robust::Decision::kInlier) {
    out.passed = received;
    legit_residuals_.push_back(out.processed);
    legit_loads_.push_back(received);
    push_accepted(received);
    if (++accepted_since_fit_ >= config_.refit_cadence) {
      refit(tracker_.value());
    }
  } else {
    out.passed = out.forecast;
    substitutions_.push_back(SubstitutionRecord{t_, received, out.forecast});
    push_substituted(out.forecast);
    if (std::abs(contamination - contamination_at_fit_) >
        config_.refit_tolerance) {
      refit(contamination);
    }
  }
  ++t_;
  return out;
}

std::vector<StepOutcome> Detector::run_stream(std::span<const double> stream) {
  std::vector<StepOutcome> outcomes;
  outcomes.reserve(stream.size());
  for (double received : stream) outcomes.push_back(step(received));
  return outcomes;
}

void write_outcomes_csv(std::span<const StepOutcome> outcomes,
                        const std::string& path,
                        const std::string& stamp_line) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  if (!stamp_line.empty()) out << "# " << stamp_line << '\n';
  out << "timestamp,received,forecast,processed,decision,passed\n";
  char buf[160];
  for (const auto& o : outcomes) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.9f,%s,%.6f", o.received,
                  o.forecast, o.processed, o.flagged() ? "outlier" : "inlier",
                  o.passed);
    out << data::format_timestamp(o.stamp) << ',' << buf << '\n';
  }
}

void write_outcomes_jsonl(std::span<const StepOutcome> outcomes,
                          const std::string& path,
                          const std::string& config_hash,
                          const std::string& version) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  char buf[360];
  for (const auto& o : outcomes) {
    std::snprintf(
        buf, sizeof(buf),
        "{\"timestamp\":\"%s\",\"received\":%.6f,\"forecast\":%.6f,"
        "\"processed\":%.9f,\"decision\":\"%s\",\"passed\":%.6f,"
        "\"config_hash\":\"%s\",\"version\":\"%s\"}",
        data::format_timestamp(o.stamp).c_str(), o.received, o.forecast,
        o.processed, o.flagged() ? "outlier" : "inlier", o.passed,
        config_hash.c_str(), version.c_str());
    out << buf << '\n';
  }
}

}  // namespace gridwatch::detect
