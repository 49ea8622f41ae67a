#include "gridwatch/etr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "gridwatch/seeding.hpp"

namespace gridwatch::forecast {

namespace {

struct NodeStats {
  double sum = 0.0;
  double sumsq = 0.0;
  std::size_t n = 0;

  void add(double y) {
    sum += y;
    sumsq += y * y;
    ++n;
  }
  double mean() const { return sum / static_cast<double>(n); }
  // Sum of squared errors around the node mean.
  double sse() const { return sumsq - sum * sum / static_cast<double>(n); }
};

class TreeBuilder {
 public:
  TreeBuilder(const data::WindowedDataset& ds, const EtrHyperparams& params,
              std::uint64_t seed)
      : ds_(ds), params_(params), rng_(seed) {}

  EtrTree build() {
    std::vector<std::size_t> indices(ds_.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    tree_.nodes.clear();
    grow(indices);
    return std::move(tree_);
  }

 private:
  std::int32_t grow(std::vector<std::size_t>& indices) {
    const auto node_id = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    NodeStats stats;
    bool pure = true;
    const double first_target = ds_.targets[indices.front()];
    for (std::size_t i : indices) {
      stats.add(ds_.targets[i]);
      pure = pure && ds_.targets[i] == first_target;
    }
    tree_.nodes[node_id].value = stats.mean();

    if (pure || indices.size() <= params_.min_split) return node_id;

    const auto split = pick_split(indices);
    if (!split.valid) return node_id;

    std::vector<std::size_t> left, right;
    left.reserve(indices.size());
    right.reserve(indices.size());
    for (std::size_t i : indices) {
      if (ds_.inputs[i][split.feature] < split.threshold) {
        left.push_back(i);
      } else {
        right.push_back(i);
      }
    }
    indices.clear();
    indices.shrink_to_fit();

    tree_.nodes[node_id].feature = static_cast<std::int32_t>(split.feature);
    tree_.nodes[node_id].threshold = split.threshold;
    const std::int32_t l = grow(left);
    tree_.nodes[node_id].left = l;
    const std::int32_t r = grow(right);
    tree_.nodes[node_id].right = r;
    return node_id;
  }

  struct SplitChoice {
    bool valid = false;
    std::size_t feature = 0;
    double threshold = 0.0;
  };

  SplitChoice pick_split(const std::vector<std::size_t>& indices) {
    const std::size_t d = ds_.lookback;
    // Partial Fisher-Yates: first K entries of a fresh identity permutation.
    if (feature_order_.size() != d) {
      feature_order_.resize(d);
      std::iota(feature_order_.begin(), feature_order_.end(), std::size_t{0});
    }
    const std::size_t k = std::min(params_.split_features, d);
    for (std::size_t j = 0; j < k; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, d - 1);
      std::swap(feature_order_[j], feature_order_[pick(rng_)]);
    }

    SplitChoice best;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t f = feature_order_[j];
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();
      for (std::size_t i : indices) {
        lo = std::min(lo, ds_.inputs[i][f]);
        hi = std::max(hi, ds_.inputs[i][f]);
      }
      if (!(hi > lo)) continue;  // constant feature at this node

      std::uniform_real_distribution<double> cut(lo, hi);
      double threshold = cut(rng_);
      int attempts = 0;
      while ((threshold <= lo || threshold >= hi) && attempts++ < 8) {
        threshold = cut(rng_);
      }
      if (threshold <= lo || threshold >= hi) continue;

      NodeStats left, right;
      for (std::size_t i : indices) {
        if (ds_.inputs[i][f] < threshold) {
          left.add(ds_.targets[i]);
        } else {
          right.add(ds_.targets[i]);
        }
      }
      if (left.n == 0 || right.n == 0) continue;
      const double score = left.sse() + right.sse();
      if (score < best_score) {
        best_score = score;
        best = SplitChoice{true, f, threshold};
      }
    }
    return best;
  }

  const data::WindowedDataset& ds_;
  const EtrHyperparams& params_;
  std::mt19937_64 rng_;
  EtrTree tree_;
  std::vector<std::size_t> feature_order_;
};

}  // namespace

double EtrTree::predict(std::span<const double> x) const {
  std::size_t node = 0;
  while (nodes[node].feature >= 0) {
    const auto& n = nodes[node];
    node = x[static_cast<std::size_t>(n.feature)] < n.threshold
               ? static_cast<std::size_t>(n.left)
               : static_cast<std::size_t>(n.right);
  }
  return nodes[node].value;
}

EtrModel train_etr(const data::WindowedDataset& dataset,
                   const EtrHyperparams& params, std::uint64_t seed) {
  if (dataset.size() == 0) throw std::invalid_argument("empty training dataset");
  if (params.tree_count == 0) throw std::invalid_argument("tree_count must be >= 1");
  if (params.split_features == 0 || params.split_features > dataset.lookback) {
    throw std::invalid_argument("split_features must be in [1, lookback]");
  }

  EtrModel model;
  model.params = params;
  model.seed = seed;
  model.feature_count = dataset.lookback;
  model.trees.reserve(params.tree_count);
  for (std::size_t b = 0; b < params.tree_count; ++b) {
    TreeBuilder builder(dataset, params, derive_seed(seed, "etr-tree", b));
    model.trees.push_back(builder.build());
  }
  return model;
}

EtrPrediction etr_predict(const EtrModel& model, std::span<const double> window) {
  if (window.size() != model.feature_count) {
    throw std::invalid_argument("window dimension mismatch");
  }
  if (model.trees.empty()) throw std::invalid_argument("untrained model");

  const auto b = static_cast<double>(model.trees.size());
  double sum = 0.0;
  double sumsq = 0.0;
  for (const auto& tree : model.trees) {
    const double p = tree.predict(window);
    sum += p;
    sumsq += p * p;
  }
  EtrPrediction out;
  out.mean = sum / b;
  if (model.trees.size() >= 2) {
    const double ss = std::max(0.0, sumsq - sum * sum / b);
    out.stddev = std::sqrt(ss / (b - 1.0));
    out.stddev_valid = true;
  }
  return out;
}

}  // namespace gridwatch::forecast
