#include "gridwatch/recurrent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gridwatch/seeding.hpp"

namespace gridwatch::forecast {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

MatrixXd sigmoid(const MatrixXd& z) {
  return ((-z.array()).exp() + 1.0).inverse().matrix();
}

class UniformFiller {
 public:
  explicit UniformFiller(std::uint64_t seed) : rng_(seed) {}

  void fill(MatrixXd& m, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng_);
    }
  }
  void fill(VectorXd& v, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index r = 0; r < v.size(); ++r) v(r) = dist(rng_);
  }
  void fill(RowVectorXd& v, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index c = 0; c < v.size(); ++c) v(c) = dist(rng_);
  }

 private:
  std::mt19937_64 rng_;
};

LstmGateWeights make_layer(Index hidden, Index input, UniformFiller& filler) {
  LstmGateWeights w;
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(input));
  const double h_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (MatrixXd* m : {&w.w_ix, &w.w_fx, &w.w_cx, &w.w_ox}) {
    m->resize(hidden, input);
    filler.fill(*m, in_bound);
  }
  for (MatrixXd* m : {&w.w_ih, &w.w_fh, &w.w_ch, &w.w_oh}) {
    m->resize(hidden, hidden);
    filler.fill(*m, h_bound);
  }
  for (VectorXd* v : {&w.b_i, &w.b_f, &w.b_c, &w.b_o}) {
    v->resize(hidden);
    filler.fill(*v, h_bound);
  }
  return w;
}

// Runs one direction over `inputs` (already in iteration order).
DirectionCache run_direction(const LstmGateWeights& w,
                             std::vector<MatrixXd> inputs) {
  DirectionCache cache;
  cache.x = std::move(inputs);
  cache.steps.reserve(cache.x.size());
  const Index hidden = w.hidden();
  const Index batch = cache.x.empty() ? 0 : cache.x.front().cols();
  MatrixXd h_prev = MatrixXd::Zero(hidden, batch);
  MatrixXd c_prev = MatrixXd::Zero(hidden, batch);
  for (const MatrixXd& x : cache.x) {
    CellState st = lstm_cell_step(w, x, h_prev, c_prev);
    h_prev = st.h;
    c_prev = st.c;
    cache.steps.push_back(std::move(st));
  }
  return cache;
}

// BPTT over one direction. `dh_above[s]` is the loss gradient arriving at
// h[s] from the head and the layer above. Returns d(input)[s].
std::vector<MatrixXd> backward_direction(const LstmGateWeights& w,
                                         const DirectionCache& cache,
                                         const std::vector<MatrixXd>& dh_above,
                                         LstmGateWeights& grad) {
  const Index hidden = w.hidden();
  const auto steps = static_cast<std::ptrdiff_t>(cache.steps.size());
  const Index batch = steps > 0 ? cache.steps.front().h.cols() : 0;

  std::vector<MatrixXd> dx(cache.steps.size());
  MatrixXd dh_carry = MatrixXd::Zero(hidden, batch);
  MatrixXd dc_carry = MatrixXd::Zero(hidden, batch);
  const MatrixXd zero = MatrixXd::Zero(hidden, batch);

  for (std::ptrdiff_t s = steps - 1; s >= 0; --s) {
    const CellState& st = cache.steps[static_cast<std::size_t>(s)];
    const MatrixXd& h_prev =
        s > 0 ? cache.steps[static_cast<std::size_t>(s - 1)].h : zero;
    const MatrixXd& c_prev =
        s > 0 ? cache.steps[static_cast<std::size_t>(s - 1)].c : zero;

    const MatrixXd dh = dh_above[static_cast<std::size_t>(s)] + dh_carry;
    const MatrixXd d_o = dh.cwiseProduct(st.tanh_c);
    const MatrixXd dc =
        dc_carry.array() +
        dh.array() * st.o.array() * (1.0 - st.tanh_c.array().square());
    const MatrixXd di = dc.cwiseProduct(st.g);
    const MatrixXd dg = dc.cwiseProduct(st.i);
    const MatrixXd df = dc.cwiseProduct(c_prev);
    dc_carry = dc.cwiseProduct(st.f);

    const MatrixXd di_pre =
        di.array() * st.i.array() * (1.0 - st.i.array());
    const MatrixXd df_pre =
        df.array() * st.f.array() * (1.0 - st.f.array());
    const MatrixXd do_pre =
        d_o.array() * st.o.array() * (1.0 - st.o.array());
    const MatrixXd dg_pre = dg.array() * (1.0 - st.g.array().square());

    const MatrixXd& x = cache.x[static_cast<std::size_t>(s)];
    grad.w_ix.noalias() += di_pre * x.transpose();
    grad.w_fx.noalias() += df_pre * x.transpose();
    grad.w_cx.noalias() += dg_pre * x.transpose();
    grad.w_ox.noalias() += do_pre * x.transpose();
    grad.w_ih.noalias() += di_pre * h_prev.transpose();
    grad.w_fh.noalias() += df_pre * h_prev.transpose();
    grad.w_ch.noalias() += dg_pre * h_prev.transpose();
    grad.w_oh.noalias() += do_pre * h_prev.transpose();
    grad.b_i += di_pre.rowwise().sum();
    grad.b_f += df_pre.rowwise().sum();
    grad.b_c += dg_pre.rowwise().sum();
    grad.b_o += do_pre.rowwise().sum();

    dh_carry = w.w_ih.transpose() * di_pre;
    dh_carry.noalias() += w.w_fh.transpose() * df_pre;
    dh_carry.noalias() += w.w_ch.transpose() * dg_pre;
    dh_carry.noalias() += w.w_oh.transpose() * do_pre;

    MatrixXd dxs = w.w_ix.transpose() * di_pre;
    dxs.noalias() += w.w_fx.transpose() * df_pre;
    dxs.noalias() += w.w_cx.transpose() * dg_pre;
    dxs.noalias() += w.w_ox.transpose() * do_pre;
    dx[static_cast<std::size_t>(s)] = std::move(dxs);
  }
  return dx;
}

void check_config(const RecurrentParams& p) {
  if (p.layers == 0 || p.forward_layers.size() != p.layers) {
    throw std::invalid_argument("inconsistent layer configuration");
  }
  if (p.arch == RecurrentArch::kBilstm &&
      p.backward_layers.size() != p.layers) {
    throw std::invalid_argument("bilstm requires matching backward layers");
  }
}

}  // namespace

std::string arch_name(RecurrentArch arch) {
  return arch == RecurrentArch::kLstm ? "lstm" : "bilstm";
}

RecurrentArch arch_from_name(std::string_view name) {
  if (name == "lstm") return RecurrentArch::kLstm;
  if (name == "bilstm") return RecurrentArch::kBilstm;
  throw std::invalid_argument("unknown recurrent arch '" + std::string(name) +
                              "'");
}

RecurrentParams init_recurrent(RecurrentArch arch, std::size_t lookback,
                               std::size_t hidden, std::size_t layers,
                               double dropout_rate, std::uint64_t seed) {
  if (layers == 0 || hidden == 0 || lookback == 0) {
    throw std::invalid_argument("layers, hidden and lookback must be positive");
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw std::invalid_argument("dropout rate must be in [0, 1)");
  }
  RecurrentParams p;
  p.arch = arch;
  p.lookback = lookback;
  p.hidden = hidden;
  p.layers = layers;
  p.dropout_rate = dropout_rate;

  UniformFiller filler(seed);
  const auto h = static_cast<Index>(hidden);
  const Index width = arch == RecurrentArch::kBilstm ? 2 * h : h;
  for (std::size_t l = 0; l < layers; ++l) {
    const Index input = l == 0 ? 1 : width;
    p.forward_layers.push_back(make_layer(h, input, filler));
  }
  if (arch == RecurrentArch::kBilstm) {
    for (std::size_t l = 0; l < layers; ++l) {
      const Index input = l == 0 ? 1 : width;
      p.backward_layers.push_back(make_layer(h, input, filler));
    }
  }
  const double head_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  p.w_fy.resize(h);
  filler.fill(p.w_fy, head_bound);
  if (arch == RecurrentArch::kBilstm) {
    p.w_by.resize(h);
    filler.fill(p.w_by, head_bound);
  } else {
    p.w_by.resize(0);
  }
  p.b_y.resize(1);
  filler.fill(p.b_y, head_bound);
  return p;
}

CellState lstm_cell_step(const LstmGateWeights& w, const MatrixXd& x,
                         const MatrixXd& h_prev, const MatrixXd& c_prev) {
  if (x.rows() != w.input() || h_prev.rows() != w.hidden() ||
      c_prev.rows() != w.hidden() || x.cols() != h_prev.cols() ||
      x.cols() != c_prev.cols()) {
    throw std::invalid_argument("lstm_cell_step shape mismatch");
  }
  const auto affine = [&](const MatrixXd& wx, const MatrixXd& wh,
                          const VectorXd& b) -> MatrixXd {
    MatrixXd z = wx * x;
    z.noalias() += wh * h_prev;
    z.colwise() += b;
    return z;
  };
  CellState st;
  st.i = sigmoid(affine(w.w_ix, w.w_ih, w.b_i));
  st.f = sigmoid(affine(w.w_fx, w.w_fh, w.b_f));
  st.g = affine(w.w_cx, w.w_ch, w.b_c).array().tanh();
  st.o = sigmoid(affine(w.w_ox, w.w_oh, w.b_o));
  st.c = st.f.cwiseProduct(c_prev) + st.i.cwiseProduct(st.g);
  st.tanh_c = st.c.array().tanh();
  st.h = st.o.cwiseProduct(st.tanh_c);
  return st;
}

DropoutMasks draw_dropout_masks(const RecurrentParams& params,
                                Eigen::Index batch, std::uint64_t seed) {
  DropoutMasks masks;
  if (params.layers < 2 || params.dropout_rate <= 0.0) return masks;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - params.dropout_rate);
  const auto h = static_cast<Index>(params.hidden);
  const Index width = params.arch == RecurrentArch::kBilstm ? 2 * h : h;
  masks.resize(params.layers - 1);
  for (auto& gap : masks) {
    gap.resize(params.lookback);
    for (auto& mask : gap) {
      mask.resize(width, batch);
      for (Index r = 0; r < width; ++r) {
        for (Index c = 0; c < batch; ++c) {
          mask(r, c) = uniform(rng) < params.dropout_rate ? 0.0 : keep_scale;
        }
      }
    }
  }
  return masks;
}

ForwardCache forward_batch(const RecurrentParams& params,
                           const MatrixXd& windows, const DropoutMasks* masks) {
  check_config(params);
  if (static_cast<std::size_t>(windows.rows()) != params.lookback) {
    throw std::invalid_argument("window length must equal lookback");
  }
  const auto T = static_cast<std::size_t>(windows.rows());
  const Index batch = windows.cols();
  const bool bi = params.arch == RecurrentArch::kBilstm;

  ForwardCache cache;
  if (masks != nullptr) cache.masks = *masks;

  // Layer-0 inputs: one scalar row per timestep.
  std::vector<MatrixXd> layer_input(T);
  for (std::size_t t = 0; t < T; ++t) layer_input[t] = windows.row(static_cast<Index>(t));

  for (std::size_t l = 0; l < params.layers; ++l) {
    std::vector<MatrixXd> fwd_in = layer_input;
    cache.fwd.push_back(run_direction(params.forward_layers[l], std::move(fwd_in)));
    if (bi) {
      std::vector<MatrixXd> bwd_in(T);
      for (std::size_t s = 0; s < T; ++s) bwd_in[s] = layer_input[T - 1 - s];
      cache.bwd.push_back(
          run_direction(params.backward_layers[l], std::move(bwd_in)));
    }
    if (l + 1 == params.layers) break;

    std::vector<MatrixXd> out(T);
    for (std::size_t t = 0; t < T; ++t) {
      if (bi) {
        MatrixXd z(2 * cache.fwd[l].steps[t].h.rows(), batch);
        z.topRows(cache.fwd[l].steps[t].h.rows()) = cache.fwd[l].steps[t].h;
        z.bottomRows(cache.fwd[l].steps[t].h.rows()) =
            cache.bwd[l].steps[T - 1 - t].h;
        out[t] = std::move(z);
      } else {
        out[t] = cache.fwd[l].steps[t].h;
      }
      if (!cache.masks.empty()) {
        out[t].array() *= cache.masks[l][t];
      }
    }
    layer_input = std::move(out);
  }

  const std::size_t top = params.layers - 1;
  cache.y = params.w_fy * cache.fwd[top].steps[T - 1].h;
  if (bi) cache.y.noalias() += params.w_by * cache.bwd[top].steps[0].h;
  cache.y.array() += params.b_y(0);
  return cache;
}

double predict_scaled(const RecurrentParams& params,
                      std::span<const double> window) {
  MatrixXd x(window.size(), 1);
  for (std::size_t t = 0; t < window.size(); ++t) x(static_cast<Index>(t), 0) = window[t];
  return forward_batch(params, x, nullptr).y(0);
}

BackwardResult backward_batch(const RecurrentParams& params,
                              const ForwardCache& cache,
                              const RowVectorXd& targets) {
  check_config(params);
  if (cache.fwd.empty() || cache.fwd.front().steps.empty()) {
    throw std::invalid_argument("backward_batch requires a forward cache");
  }
  const auto T = cache.fwd.front().steps.size();
  const Index batch = cache.y.cols();
  if (targets.cols() != batch) {
    throw std::invalid_argument("target batch mismatch");
  }
  const bool bi = params.arch == RecurrentArch::kBilstm;
  const auto h = static_cast<Index>(params.hidden);

  BackwardResult result;
  result.grads = zeros_like(params);
  const RowVectorXd err = cache.y - targets;
  result.loss = err.squaredNorm() / static_cast<double>(batch);
  const RowVectorXd dy = 2.0 * err / static_cast<double>(batch);

  const std::size_t top = params.layers - 1;
  result.grads.w_fy = dy * cache.fwd[top].steps[T - 1].h.transpose();
  if (bi) result.grads.w_by = dy * cache.bwd[top].steps[0].h.transpose();
  result.grads.b_y(0) = dy.sum();

  const MatrixXd zero = MatrixXd::Zero(h, batch);
  std::vector<MatrixXd> dh_fwd(T, zero);
  std::vector<MatrixXd> dh_bwd(bi ? T : 0, zero);
  dh_fwd[T - 1] = params.w_fy.transpose() * dy;
  if (bi) dh_bwd[0] = params.w_by.transpose() * dy;

  for (std::size_t l = params.layers; l-- > 0;) {
    std::vector<MatrixXd> dx_fwd = backward_direction(
        params.forward_layers[l], cache.fwd[l], dh_fwd,
        result.grads.forward_layers[l]);
    std::vector<MatrixXd> dx_bwd;
    if (bi) {
      dx_bwd = backward_direction(params.backward_layers[l], cache.bwd[l],
                                  dh_bwd, result.grads.backward_layers[l]);
    }
    if (l == 0) break;

    std::vector<MatrixXd> d_below(T);
    for (std::size_t t = 0; t < T; ++t) {
      d_below[t] = dx_fwd[t];
      if (bi) d_below[t] += dx_bwd[T - 1 - t];
      if (!cache.masks.empty()) d_below[t].array() *= cache.masks[l - 1][t];
    }
    for (std::size_t t = 0; t < T; ++t) {
      if (bi) {
        dh_fwd[t] = d_below[t].topRows(h);
        dh_bwd[T - 1 - t] = d_below[t].bottomRows(h);
      } else {
        dh_fwd[t] = d_below[t];
      }
    }
  }
  return result;
}

double batch_loss(const RecurrentParams& params, const MatrixXd& windows,
                  const RowVectorXd& targets, const DropoutMasks* masks) {
  const ForwardCache cache = forward_batch(params, windows, masks);
  return (cache.y - targets).squaredNorm() / static_cast<double>(targets.cols());
}

RecurrentParams zeros_like(const RecurrentParams& params) {
  RecurrentParams z = params;
  const auto zero_layer = [](LstmGateWeights& w) {
    for (MatrixXd* m : {&w.w_ix, &w.w_fx, &w.w_cx, &w.w_ox, &w.w_ih, &w.w_fh,
                        &w.w_ch, &w.w_oh}) {
      m->setZero();
    }
    for (VectorXd* v : {&w.b_i, &w.b_f, &w.b_c, &w.b_o}) v->setZero();
  };
  for (auto& layer : z.forward_layers) zero_layer(layer);
  for (auto& layer : z.backward_layers) zero_layer(layer);
  z.w_fy.setZero();
  z.w_by.setZero();
  z.b_y.setZero();
  return z;
}

std::vector<double*> parameter_view(RecurrentParams& params) {
  std::vector<double*> view;
  const auto add_matrix = [&view](MatrixXd& m) {
    for (Index c = 0; c < m.cols(); ++c) {
      for (Index r = 0; r < m.rows(); ++r) view.push_back(&m(r, c));
    }
  };
  const auto add_vector = [&view](VectorXd& v) {
    for (Index r = 0; r < v.size(); ++r) view.push_back(&v(r));
  };
  const auto add_layer = [&](LstmGateWeights& w) {
    for (MatrixXd* m : {&w.w_ix, &w.w_fx, &w.w_cx, &w.w_ox, &w.w_ih, &w.w_fh,
                        &w.w_ch, &w.w_oh}) {
      add_matrix(*m);
    }
    for (VectorXd* v : {&w.b_i, &w.b_f, &w.b_c, &w.b_o}) add_vector(*v);
  };
  for (auto& layer : params.forward_layers) add_layer(layer);
  for (auto& layer : params.backward_layers) add_layer(layer);
  for (Index c = 0; c < params.w_fy.size(); ++c) view.push_back(&params.w_fy(c));
  for (Index c = 0; c < params.w_by.size(); ++c) view.push_back(&params.w_by(c));
  add_vector(params.b_y);
  return view;
}

TrainResult train_recurrent(const data::WindowedDataset& dataset,
                            const TrainConfig& config, RecurrentArch arch) {
  if (dataset.size() == 0) throw std::invalid_argument("empty training dataset");
  if (config.epochs == 0) throw std::invalid_argument("epochs must be >= 1");
  if (config.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");

  TrainResult result;
  result.params =
      init_recurrent(arch, dataset.lookback, config.hidden, config.layers,
                     config.dropout, derive_seed(config.seed, "init"));

  RecurrentParams adam_m = zeros_like(result.params);
  RecurrentParams adam_v = zeros_like(result.params);
  const std::vector<double*> theta = parameter_view(result.params);
  const std::vector<double*> m1 = parameter_view(adam_m);
  const std::vector<double*> m2 = parameter_view(adam_v);

  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  const auto lookback = static_cast<Index>(dataset.lookback);
  double beta1_t = 1.0;
  double beta2_t = 1.0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(derive_seed(config.seed, "shuffle", epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(begin + config.batch_size, n);
      const auto m = static_cast<Index>(end - begin);
      MatrixXd windows(lookback, m);
      RowVectorXd targets(m);
      for (std::size_t j = begin; j < end; ++j) {
        const std::size_t idx = order[j];
        const auto col = static_cast<Index>(j - begin);
        for (Index t = 0; t < lookback; ++t) {
          windows(t, col) = dataset.inputs[idx][static_cast<std::size_t>(t)];
        }
        targets(col) = dataset.targets[idx];
      }

      DropoutMasks masks;
      const DropoutMasks* mask_ptr = nullptr;
      if (config.dropout > 0.0 && config.layers > 1) {
        masks = draw_dropout_masks(
            result.params, m,
            derive_seed(config.seed, "dropout", epoch, batch_index));
        mask_ptr = &masks;
      }

      const ForwardCache cache = forward_batch(result.params, windows, mask_ptr);
      BackwardResult back = backward_batch(result.params, cache, targets);
      if (!std::isfinite(back.loss)) {
        throw TrainingDivergence(epoch, "training diverged at epoch " +
                                            std::to_string(epoch));
      }
      epoch_loss += back.loss * static_cast<double>(m);

      RecurrentParams grads = std::move(back.grads);
      const std::vector<double*> g = parameter_view(grads);
      beta1_t *= config.beta1;
      beta2_t *= config.beta2;
      const double alpha =
          config.learning_rate * std::sqrt(1.0 - beta2_t) / (1.0 - beta1_t);
      for (std::size_t i = 0; i < theta.size(); ++i) {
        *m1[i] = config.beta1 * *m1[i] + (1.0 - config.beta1) * *g[i];
        *m2[i] = config.beta2 * *m2[i] + (1.0 - config.beta2) * *g[i] * *g[i];
        *theta[i] -= alpha * *m1[i] / (std::sqrt(*m2[i]) + config.epsilon);
      }
      ++batch_index;
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(n));
  }
  return result;
}

}  // namespace gridwatch::forecast
