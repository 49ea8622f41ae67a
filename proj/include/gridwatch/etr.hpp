#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gridwatch/data.hpp"

namespace gridwatch::forecast {

struct EtrHyperparams {
  std::size_t tree_count = 100;     // B
  std::size_t split_features = 5;   // K, candidate features per split
  std::size_t min_split = 2;        // n_min; nodes with <= n_min samples are leaves
};

struct EtrNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;  // leaf: mean target of samples reaching it
};

struct EtrTree {
  std::vector<EtrNode> nodes;
  double predict(std::span<const double> x) const;
};

struct EtrModel {
  EtrHyperparams params;
  std::uint64_t seed = 0;
  std::size_t feature_count = 0;
  std::vector<EtrTree> trees;
};

struct EtrPrediction {
  double mean = 0.0;
  double stddev = 0.0;
  bool stddev_valid = false;  // requires B >= 2
};

// Grows B totally randomized trees on the full dataset (no bootstrap):
// K features sampled per node, one uniform cut point per candidate strictly
// inside that feature's local range, best candidate by within-node target
// variance.
EtrModel train_etr(const data::WindowedDataset& dataset,
                   const EtrHyperparams& params, std::uint64_t seed);

// Ensemble mean and the B-1-normalized spread of per-tree predictions.
EtrPrediction etr_predict(const EtrModel& model, std::span<const double> window);

}  // namespace gridwatch::forecast
