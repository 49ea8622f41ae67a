#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <vector>

namespace gridwatch::robust {

// Added to the covariance diagonal so the precision matrix always exists;
// in scaled-residual units a near-perfect forecaster can make the training
// residuals essentially constant.
inline constexpr double kVarianceFloor = 1e-9;

// Regularized lower incomplete gamma at half-integer/integer shape, i.e. the
// chi-square CDF; closed forms, no external stats dependency.
double chi2_cdf(int dof, double x);
double chi2_quantile(int dof, double p);

// Type-7 empirical quantile: linear interpolation between order statistics.
double quantile_linear(std::vector<double> values, double q);

struct EnvelopeModel {
  Eigen::VectorXd location;
  Eigen::MatrixXd covariance;  // symmetric, eigenvalues >= variance floor
  Eigen::MatrixXd precision;
  double contamination = 0.05;
  double threshold = 0.0;  // Mahalanobis cutoff, strict-greater classifies out
  double support_fraction = 0.5;

  Eigen::Index dim() const { return location.size(); }
};

// sqrt((x - mu)^T C^{-1} (x - mu)); zero iff x == mu.
double mahalanobis(const Eigen::VectorXd& x, const EnvelopeModel& model);

struct McdResult {
  Eigen::VectorXd location;
  Eigen::MatrixXd covariance;          // consistency-rescaled, floored
  std::vector<Eigen::Index> support;   // indices of the winning h-subset
};

// FastMCD: seeded random (d+1)-element starts, two concentration steps each,
// the best few iterated to convergence; returns the minimum-determinant
// subset's mean/covariance with the chi-square consistency factor applied.
McdResult fast_mcd(const Eigen::MatrixXd& data, double support_fraction,
                   std::uint64_t seed);

// fast_mcd + Mahalanobis distances of the training rows + threshold at the
// (1 - contamination) empirical quantile.
EnvelopeModel fit_envelope(const Eigen::MatrixXd& data, double contamination,
                           double support_fraction, std::uint64_t seed);

// Same fit, but the contamination is estimated from the data: the count m of
// rows with any coordinate above `cutoff_value` (raw feature units, frozen
// from a clean calibration sample by the caller). Counting exceedances of a
// fixed cutoff rather than past decisions keeps stray false positives from
// feeding back into the decision quantile, and a raw-unit cutoff stays valid
// whatever fraction of the window is contaminated.
EnvelopeModel fit_envelope_adaptive(const Eigen::MatrixXd& data,
                                    double cutoff_value, double c_min,
                                    double c_max, double support_fraction,
                                    std::uint64_t seed);

enum class Decision { kInlier, kOutlier };

Decision decide(const EnvelopeModel& model, const Eigen::VectorXd& x);

// Trailing-window outlier rate, clipped to [c_min, c_max]; drives the hourly
// contamination update and signals when the envelope needs refitting.
class ContaminationTracker {
 public:
  ContaminationTracker(std::size_t window, double c_min, double c_max,
                       double initial);

  // Slides the decision window and returns the updated contamination.
  double update(Decision decision);
  void seed_inliers(std::size_t count);

  double value() const { return value_; }
  double rate() const;
  std::size_t window() const { return window_; }

 private:
  void recompute();

  std::size_t window_;
  double c_min_;
  double c_max_;
  double value_;
  std::deque<bool> outliers_;
  std::size_t outlier_count_ = 0;
};

}  // namespace gridwatch::robust
