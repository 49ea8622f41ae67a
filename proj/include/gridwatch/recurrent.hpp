#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridwatch/data.hpp"

namespace gridwatch::forecast {

enum class RecurrentArch { kLstm, kBilstm };

std::string arch_name(RecurrentArch arch);
RecurrentArch arch_from_name(std::string_view name);

// One direction of one recurrent layer: input, forget, candidate and output
// gates, each with input-to-hidden and hidden-to-hidden weights plus bias.
struct LstmGateWeights {
  Eigen::MatrixXd w_ix, w_fx, w_cx, w_ox;  // hidden x input
  Eigen::MatrixXd w_ih, w_fh, w_ch, w_oh;  // hidden x hidden
  Eigen::VectorXd b_i, b_f, b_c, b_o;

  Eigen::Index hidden() const { return w_ih.rows(); }
  Eigen::Index input() const { return w_ix.cols(); }
};

// Stacked (bi)directional recurrent regressor with a scalar linear head.
// For kLstm the backward stack is empty and w_by has zero size.
struct RecurrentParams {
  RecurrentArch arch = RecurrentArch::kLstm;
  std::size_t lookback = 14;
  std::size_t hidden = 128;
  std::size_t layers = 2;
  double dropout_rate = 0.3;  // applied between recurrent layers, training only
  std::vector<LstmGateWeights> forward_layers;
  std::vector<LstmGateWeights> backward_layers;
  Eigen::RowVectorXd w_fy;  // head weights on the forward final state
  Eigen::RowVectorXd w_by;  // head weights on the backward final state
  Eigen::VectorXd b_y;      // scalar bias, kept 1-dim for uniform updates
};

// Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] (fan_in = input
// columns for matrices, hidden size for biases); fully seeded.
RecurrentParams init_recurrent(RecurrentArch arch, std::size_t lookback,
                               std::size_t hidden, std::size_t layers,
                               double dropout_rate, std::uint64_t seed);

// Gate activations of one step over a batch (columns are samples).
struct CellState {
  Eigen::MatrixXd i, f, g, o;  // gate outputs; g is the tanh candidate
  Eigen::MatrixXd c, tanh_c, h;
};

// Single LSTM cell step: sigmoid gates, tanh candidate,
// c = f*c_prev + i*g, h = o*tanh(c). Shapes are validated.
CellState lstm_cell_step(const LstmGateWeights& w, const Eigen::MatrixXd& x,
                         const Eigen::MatrixXd& h_prev,
                         const Eigen::MatrixXd& c_prev);

struct DirectionCache {
  std::vector<Eigen::MatrixXd> x;  // inputs in iteration order
  std::vector<CellState> steps;
};

// masks[gap][t]: entries 0 or 1/(1-rate); gap g sits between layers g and g+1.
using DropoutMasks = std::vector<std::vector<Eigen::ArrayXXd>>;

DropoutMasks draw_dropout_masks(const RecurrentParams& params,
                                Eigen::Index batch, std::uint64_t seed);

struct ForwardCache {
  std::vector<DirectionCache> fwd;  // one per layer
  std::vector<DirectionCache> bwd;  // bilstm only
  DropoutMasks masks;               // empty in inference mode
  Eigen::RowVectorXd y;             // 1 x batch predictions
};

// Full unrolled pass over a batch of windows (lookback x batch, scaled units).
// masks == nullptr selects inference mode (dropout disabled).
ForwardCache forward_batch(const RecurrentParams& params,
                           const Eigen::MatrixXd& windows,
                           const DropoutMasks* masks);

// Inference-mode scalar prediction for a single window.
double predict_scaled(const RecurrentParams& params,
                      std::span<const double> window);

struct BackwardResult {
  RecurrentParams grads;  // same tensor layout as the parameters
  double loss = 0.0;      // mean squared error over the batch
};

// Backpropagation through time of the MSE loss; requires the caches from
// forward_batch.
BackwardResult backward_batch(const RecurrentParams& params,
                              const ForwardCache& cache,
                              const Eigen::RowVectorXd& targets);

// Loss-only evaluation with explicit masks; the finite-difference harness
// uses this with frozen masks.
double batch_loss(const RecurrentParams& params, const Eigen::MatrixXd& windows,
                  const Eigen::RowVectorXd& targets, const DropoutMasks* masks);

RecurrentParams zeros_like(const RecurrentParams& params);

// Flat, fixed-order view over every trainable scalar.
std::vector<double*> parameter_view(RecurrentParams& params);

struct TrainConfig {
  std::size_t epochs = 150;
  std::size_t hidden = 128;
  std::size_t layers = 2;
  double dropout = 0.3;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(std::size_t epoch, const std::string& message)
      : std::runtime_error(message), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

struct TrainResult {
  RecurrentParams params;
  std::vector<double> loss_curve;  // per-epoch mean training loss
};

// Seeded Adam over shuffled mini-batches; deterministic per seed.
TrainResult train_recurrent(const data::WindowedDataset& dataset,
                            const TrainConfig& config, RecurrentArch arch);

}  // namespace gridwatch::forecast
