#include "gridwatch/robust.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "gridwatch/seeding.hpp"

namespace gridwatch::robust {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr int kRandomStarts = 50;
constexpr int kInitialCSteps = 2;
constexpr int kFinalists = 10;
constexpr int kMaxCSteps = 30;
constexpr double kDetTolerance = 1e-12;

struct SubsetEstimate {
  VectorXd mean;
  MatrixXd cov;  // floored
  double det = std::numeric_limits<double>::infinity();
};

SubsetEstimate estimate(const MatrixXd& data, const std::vector<Index>& subset) {
  const Index d = data.cols();
  const auto n = static_cast<double>(subset.size());
  SubsetEstimate est;
  est.mean = VectorXd::Zero(d);
  for (Index i : subset) est.mean += data.row(i).transpose();
  est.mean /= n;
  est.cov = MatrixXd::Zero(d, d);
  for (Index i : subset) {
    const VectorXd c = data.row(i).transpose() - est.mean;
    est.cov.noalias() += c * c.transpose();
  }
  est.cov /= n;
  est.cov.diagonal().array() += kVarianceFloor;
  est.det = est.cov.determinant();
  return est;
}

// One concentration step: keep the h points closest to the current estimate.
std::vector<Index> c_step_select(const MatrixXd& data, const SubsetEstimate& est,
                                 std::size_t h) {
  const Index n = data.rows();
  const MatrixXd precision =
      est.cov.ldlt().solve(MatrixXd::Identity(data.cols(), data.cols()));
  std::vector<std::pair<double, Index>> dist;
  dist.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const VectorXd c = data.row(i).transpose() - est.mean;
    dist.emplace_back(c.dot(precision * c), i);
  }
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(h) - 1,
                   dist.end());
  std::vector<Index> subset;
  subset.reserve(h);
  for (std::size_t i = 0; i < h; ++i) subset.push_back(dist[i].second);
  std::sort(subset.begin(), subset.end());
  return subset;
}

struct Candidate {
  SubsetEstimate est;
  std::vector<Index> subset;
  int start_index = 0;
};

Candidate converge(const MatrixXd& data, Candidate cand, std::size_t h,
                   int max_steps) {
  for (int step = 0; step < max_steps; ++step) {
    std::vector<Index> next = c_step_select(data, cand.est, h);
    SubsetEstimate est = estimate(data, next);
    const bool same_subset = next == cand.subset;
    const bool converged = est.det >= cand.est.det - kDetTolerance;
    cand.subset = std::move(next);
    cand.est = std::move(est);
    if (same_subset || converged) break;
  }
  return cand;
}

}  // namespace

double chi2_cdf(int dof, double x) {
  if (dof < 1) throw std::invalid_argument("chi2 dof must be >= 1");
  if (x <= 0.0) return 0.0;
  const double y = x / 2.0;
  // Regularized lower incomplete gamma P(a, y) by upward recurrence:
  // P(a + 1, y) = P(a, y) - y^a e^-y / Gamma(a + 1), starting from the
  // closed forms at a = 1/2 and a = 1.
  double a;
  double p;
  if (dof % 2 == 1) {
    a = 0.5;
    p = std::erf(std::sqrt(y));
  } else {
    a = 1.0;
    p = -std::expm1(-y);
  }
  while (a < dof / 2.0 - 0.25) {
    p -= std::exp(a * std::log(y) - y - std::lgamma(a + 1.0));
    a += 1.0;
  }
  return std::clamp(p, 0.0, 1.0);
}

double chi2_quantile(int dof, double p) {
  if (p <= 0.0 || p >= 1.0) {
    throw std::invalid_argument("chi2 quantile requires p in (0, 1)");
  }
  double hi = static_cast<double>(dof);
  while (chi2_cdf(dof, hi) < p) hi *= 2.0;
  double lo = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (chi2_cdf(dof, mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double quantile_linear(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of empty data");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile q outside [0,1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

double mahalanobis(const Eigen::VectorXd& x, const EnvelopeModel& model) {
  if (x.size() != model.dim()) {
    throw std::invalid_argument("mahalanobis dimension mismatch");
  }
  const VectorXd c = x - model.location;
  return std::sqrt(std::max(0.0, c.dot(model.precision * c)));
}

McdResult fast_mcd(const Eigen::MatrixXd& data, double support_fraction,
                   std::uint64_t seed) {
  const Index n = data.rows();
  const Index d = data.cols();
  if (n < d + 1) throw std::invalid_argument("fast_mcd requires n >= d + 1");
  if (support_fraction < 0.5 || support_fraction > 1.0) {
    throw std::invalid_argument("support_fraction must be in [0.5, 1]");
  }
  const auto h = std::clamp<std::size_t>(
      static_cast<std::size_t>(
          std::ceil(support_fraction * static_cast<double>(n))),
      static_cast<std::size_t>(d) + 1, static_cast<std::size_t>(n));

  McdResult result;
  if (h == static_cast<std::size_t>(n)) {
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    const SubsetEstimate est = estimate(data, all);
    result.location = est.mean;
    result.covariance = est.cov;
    result.support = std::move(all);
    return result;
  }

  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});

  std::vector<Candidate> finalists;
  for (int start = 0; start < kRandomStarts; ++start) {
    std::mt19937_64 rng(derive_seed(seed, "mcd-start", static_cast<std::uint64_t>(start)));
    // Partial Fisher-Yates for the initial (d+1)-subset; grow it until the
    // covariance is non-singular or the pool is exhausted.
    std::vector<Index> order = pool;
    std::size_t taken = 0;
    const auto take_next = [&]() {
      std::uniform_int_distribution<std::size_t> pick(taken, order.size() - 1);
      std::swap(order[taken], order[pick(rng)]);
      ++taken;
    };
    for (Index k = 0; k < d + 1; ++k) take_next();

    Candidate cand;
    cand.start_index = start;
    cand.subset.assign(order.begin(),
                       order.begin() + static_cast<std::ptrdiff_t>(taken));
    cand.est = estimate(data, cand.subset);
    while (cand.est.det <= kVarianceFloor * 10.0 && taken < order.size()) {
      take_next();
      cand.subset.assign(order.begin(),
                         order.begin() + static_cast<std::ptrdiff_t>(taken));
      cand.est = estimate(data, cand.subset);
    }
    cand = converge(data, std::move(cand), h, kInitialCSteps);
    finalists.push_back(std::move(cand));
  }

  std::stable_sort(finalists.begin(), finalists.end(),
                   [](const Candidate& a, const Candidate& b) {
                     if (a.est.det != b.est.det) return a.est.det < b.est.det;
                     return a.start_index < b.start_index;
                   });
  if (finalists.size() > kFinalists) finalists.resize(kFinalists);

  Candidate best;
  for (auto& cand : finalists) {
    Candidate converged = converge(data, std::move(cand), h, kMaxCSteps);
    if (converged.est.det < best.est.det ||
        (converged.est.det == best.est.det &&
         converged.start_index < best.start_index)) {
      best = std::move(converged);
    }
  }

  // Consistency rescaling under the Gaussian model: the h-subset covariance
  // underestimates scatter by F_{chi2_{d+2}}(q_alpha) / alpha.
  const double alpha = static_cast<double>(h) / static_cast<double>(n);
  const double q_alpha = chi2_quantile(static_cast<int>(d), alpha);
  const double factor = alpha / chi2_cdf(static_cast<int>(d) + 2, q_alpha);

  result.location = best.est.mean;
  MatrixXd raw = best.est.cov;
  raw.diagonal().array() -= kVarianceFloor;  // rescale the raw subset scatter
  result.covariance = raw * factor;
  result.covariance.diagonal().array() += kVarianceFloor;
  result.support = std::move(best.subset);
  return result;
}

namespace {

EnvelopeModel envelope_from_mcd(const Eigen::MatrixXd& data, McdResult mcd,
                                double support_fraction,
                                std::vector<double>& distances) {
  EnvelopeModel model;
  model.location = std::move(mcd.location);
  model.covariance = std::move(mcd.covariance);
  model.precision = model.covariance.ldlt().solve(
      MatrixXd::Identity(data.cols(), data.cols()));
  model.support_fraction = support_fraction;
  distances.clear();
  distances.reserve(static_cast<std::size_t>(data.rows()));
  for (Index i = 0; i < data.rows(); ++i) {
    distances.push_back(mahalanobis(data.row(i).transpose(), model));
  }
  return model;
}

}  // namespace

EnvelopeModel fit_envelope(const Eigen::MatrixXd& data, double contamination,
                           double support_fraction, std::uint64_t seed) {
  if (data.rows() == 0) throw std::invalid_argument("fit_envelope needs data");
  if (contamination <= 0.0 || contamination > 0.5) {
    throw std::invalid_argument("contamination must be in (0, 0.5]");
  }
  std::vector<double> distances;
  EnvelopeModel model =
      envelope_from_mcd(data, fast_mcd(data, support_fraction, seed),
                        support_fraction, distances);
  model.contamination = contamination;
  model.threshold = quantile_linear(std::move(distances), 1.0 - contamination);
  return model;
}

EnvelopeModel fit_envelope_adaptive(const Eigen::MatrixXd& data,
                                    double cutoff_value, double c_min,
                                    double c_max, double support_fraction,
                                    std::uint64_t seed) {
  if (data.rows() < 2) {
    throw std::invalid_argument("adaptive fit needs at least two rows");
  }
  if (cutoff_value < 0.0) {
    throw std::invalid_argument("cutoff_value must be nonnegative");
  }
  std::vector<double> distances;
  EnvelopeModel model =
      envelope_from_mcd(data, fast_mcd(data, support_fraction, seed),
                        support_fraction, distances);
  double exceedances = 0.0;
  for (Index i = 0; i < data.rows(); ++i) {
    exceedances += data.row(i).maxCoeff() > cutoff_value ? 1.0 : 0.0;
  }
  // The (1 - c) quantile position lands at (n-1) - m + 0.75: three quarters
  // of the way from the last bulk distance toward the first exceedance,
  // inside the gap but never past the exceedance itself.
  const double raw =
      (exceedances - 0.75) / static_cast<double>(data.rows() - 1);
  model.contamination = std::clamp(raw, c_min, c_max);
  model.threshold =
      quantile_linear(std::move(distances), 1.0 - model.contamination);
  return model;
}

Decision decide(const EnvelopeModel& model, const Eigen::VectorXd& x) {
  return mahalanobis(x, model) > model.threshold ? Decision::kOutlier
                                                 : Decision::kInlier;
}

ContaminationTracker::ContaminationTracker(std::size_t window, double c_min,
                                           double c_max, double initial)
    : window_(window), c_min_(c_min), c_max_(c_max), value_(initial) {
  if (window == 0) throw std::invalid_argument("tracker window must be >= 1");
  if (!(c_min > 0.0 && c_min <= c_max && c_max <= 0.5)) {
    throw std::invalid_argument("require 0 < c_min <= c_max <= 0.5");
  }
}

double ContaminationTracker::update(Decision decision) {
  const bool outlier = decision == Decision::kOutlier;
  outliers_.push_back(outlier);
  outlier_count_ += outlier ? 1 : 0;
  if (outliers_.size() > window_) {
    outlier_count_ -= outliers_.front() ? 1 : 0;
    outliers_.pop_front();
  }
  recompute();
  return value_;
}

void ContaminationTracker::seed_inliers(std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) update(Decision::kInlier);
}

double ContaminationTracker::rate() const {
  if (outliers_.empty()) return 0.0;
  return static_cast<double>(outlier_count_) /
         static_cast<double>(outliers_.size());
}

void ContaminationTracker::recompute() {
  value_ = std::clamp(rate(), c_min_, c_max_);
}

}  // namespace gridwatch::robust
