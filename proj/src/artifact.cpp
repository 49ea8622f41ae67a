#include "gridwatch/artifact.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "gridwatch/version.hpp"

namespace gridwatch::artifact {

namespace {

using nlohmann::json;

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols =
      rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : Eigen::Index{0};
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = j.at(static_cast<std::size_t>(r))
                    .at(static_cast<std::size_t>(c))
                    .get<double>();
    }
  }
  return m;
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  }
  return v;
}

json row_vector_json(const Eigen::RowVectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::RowVectorXd row_vector_from(const json& j) {
  Eigen::RowVectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  }
  return v;
}

json layer_json(const forecast::LstmGateWeights& w) {
  return json{{"w_ix", matrix_json(w.w_ix)}, {"w_fx", matrix_json(w.w_fx)},
              {"w_cx", matrix_json(w.w_cx)}, {"w_ox", matrix_json(w.w_ox)},
              {"w_ih", matrix_json(w.w_ih)}, {"w_fh", matrix_json(w.w_fh)},
              {"w_ch", matrix_json(w.w_ch)}, {"w_oh", matrix_json(w.w_oh)},
              {"b_i", vector_json(w.b_i)},   {"b_f", vector_json(w.b_f)},
              {"b_c", vector_json(w.b_c)},   {"b_o", vector_json(w.b_o)}};
}

forecast::LstmGateWeights layer_from(const json& j) {
  forecast::LstmGateWeights w;
  w.w_ix = matrix_from(j.at("w_ix"));
  w.w_fx = matrix_from(j.at("w_fx"));
  w.w_cx = matrix_from(j.at("w_cx"));
  w.w_ox = matrix_from(j.at("w_ox"));
  w.w_ih = matrix_from(j.at("w_ih"));
  w.w_fh = matrix_from(j.at("w_fh"));
  w.w_ch = matrix_from(j.at("w_ch"));
  w.w_oh = matrix_from(j.at("w_oh"));
  w.b_i = vector_from(j.at("b_i"));
  w.b_f = vector_from(j.at("b_f"));
  w.b_c = vector_from(j.at("b_c"));
  w.b_o = vector_from(j.at("b_o"));
  return w;
}

json etr_json(const forecast::EtrModel& model) {
  json trees = json::array();
  for (const auto& tree : model.trees) {
    json nodes = json::array();
    for (const auto& n : tree.nodes) {
      nodes.push_back(json::array(
          {n.feature, n.threshold, n.left, n.right, n.value}));
    }
    trees.push_back(std::move(nodes));
  }
  return json{{"tree_count", model.params.tree_count},
              {"split_features", model.params.split_features},
              {"min_split", model.params.min_split},
              {"feature_count", model.feature_count},
              {"seed", model.seed},
              {"trees", std::move(trees)}};
}

forecast::EtrModel etr_from(const json& j) {
  forecast::EtrModel model;
  model.params.tree_count = j.at("tree_count").get<std::size_t>();
  model.params.split_features = j.at("split_features").get<std::size_t>();
  model.params.min_split = j.at("min_split").get<std::size_t>();
  model.feature_count = j.at("feature_count").get<std::size_t>();
  model.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& tree_json : j.at("trees")) {
    forecast::EtrTree tree;
    for (const auto& n : tree_json) {
      forecast::EtrNode node;
      node.feature = n.at(0).get<std::int32_t>();
      node.threshold = n.at(1).get<double>();
      node.left = n.at(2).get<std::int32_t>();
      node.right = n.at(3).get<std::int32_t>();
      node.value = n.at(4).get<double>();
      tree.nodes.push_back(node);
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

json recurrent_json(const forecast::RecurrentParams& p) {
  json fwd = json::array();
  for (const auto& l : p.forward_layers) fwd.push_back(layer_json(l));
  json bwd = json::array();
  for (const auto& l : p.backward_layers) bwd.push_back(layer_json(l));
  return json{{"arch", forecast::arch_name(p.arch)},
              {"lookback", p.lookback},
              {"hidden", p.hidden},
              {"layers", p.layers},
              {"dropout_rate", p.dropout_rate},
              {"forward_layers", std::move(fwd)},
              {"backward_layers", std::move(bwd)},
              {"w_fy", row_vector_json(p.w_fy)},
              {"w_by", row_vector_json(p.w_by)},
              {"b_y", vector_json(p.b_y)}};
}

forecast::RecurrentParams recurrent_from(const json& j) {
  forecast::RecurrentParams p;
  p.arch = forecast::arch_from_name(j.at("arch").get<std::string>());
  p.lookback = j.at("lookback").get<std::size_t>();
  p.hidden = j.at("hidden").get<std::size_t>();
  p.layers = j.at("layers").get<std::size_t>();
  p.dropout_rate = j.at("dropout_rate").get<double>();
  for (const auto& l : j.at("forward_layers")) {
    p.forward_layers.push_back(layer_from(l));
  }
  for (const auto& l : j.at("backward_layers")) {
    p.backward_layers.push_back(layer_from(l));
  }
  p.w_fy = row_vector_from(j.at("w_fy"));
  p.w_by = row_vector_from(j.at("w_by"));
  p.b_y = vector_from(j.at("b_y"));
  return p;
}

class EtrForecaster : public forecast::Forecaster {
 public:
  EtrForecaster(forecast::EtrModel model, data::ScalingTransform scaling,
                std::size_t lookback)
      : model_(std::move(model)), scaling_(scaling), lookback_(lookback) {}

  double forecast(std::size_t, std::span<const double> window) const override {
    if (window.size() < lookback_) {
      throw std::invalid_argument("forecast window shorter than lookback");
    }
    std::vector<double> scaled(lookback_);
    const std::size_t offset = window.size() - lookback_;
    for (std::size_t i = 0; i < lookback_; ++i) {
      scaled[i] = scaling_.scale(window[offset + i]);
    }
    return scaling_.unscale(forecast::etr_predict(model_, scaled).mean);
  }
  std::size_t lookback() const override { return lookback_; }
  std::string_view tag() const override { return "etr"; }

 private:
  forecast::EtrModel model_;
  data::ScalingTransform scaling_;
  std::size_t lookback_;
};

class RecurrentForecaster : public forecast::Forecaster {
 public:
  RecurrentForecaster(forecast::RecurrentParams params,
                      data::ScalingTransform scaling)
      : params_(std::move(params)), scaling_(scaling) {}

  double forecast(std::size_t, std::span<const double> window) const override {
    if (window.size() < params_.lookback) {
      throw std::invalid_argument("forecast window shorter than lookback");
    }
    std::vector<double> scaled(params_.lookback);
    const std::size_t offset = window.size() - params_.lookback;
    for (std::size_t i = 0; i < params_.lookback; ++i) {
      scaled[i] = scaling_.scale(window[offset + i]);
    }
    return scaling_.unscale(forecast::predict_scaled(params_, scaled));
  }
  std::size_t lookback() const override { return params_.lookback; }
  std::string_view tag() const override {
    return params_.arch == forecast::RecurrentArch::kLstm ? "lstm" : "bilstm";
  }

 private:
  forecast::RecurrentParams params_;
  data::ScalingTransform scaling_;
};

}  // namespace

void save(const ModelArtifact& artifact, const std::string& path) {
  json doc;
  doc["format"] = std::string(kArtifactFormat);
  doc["version"] = std::string(kVersion);
  doc["arch"] = artifact.arch;
  doc["lookback"] = artifact.lookback;
  doc["scaling"] = {{"lo", artifact.scaling.lo}, {"hi", artifact.scaling.hi}};
  doc["seed"] = artifact.seed;
  doc["trained_rows"] = artifact.trained_rows;
  if (artifact.etr) doc["etr"] = etr_json(*artifact.etr);
  if (artifact.recurrent) doc["recurrent"] = recurrent_json(*artifact.recurrent);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << doc.dump() << '\n';
}

ModelArtifact load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json doc;
  in >> doc;
  if (doc.at("format").get<std::string>() != kArtifactFormat) {
    throw std::runtime_error("unsupported artifact format in '" + path + "'");
  }
  ModelArtifact artifact;
  artifact.arch = doc.at("arch").get<std::string>();
  artifact.lookback = doc.at("lookback").get<std::size_t>();
  artifact.scaling.lo = doc.at("scaling").at("lo").get<double>();
  artifact.scaling.hi = doc.at("scaling").at("hi").get<double>();
  artifact.seed = doc.at("seed").get<std::uint64_t>();
  artifact.trained_rows = doc.at("trained_rows").get<std::size_t>();
  if (doc.contains("etr")) artifact.etr = etr_from(doc.at("etr"));
  if (doc.contains("recurrent")) {
    artifact.recurrent = recurrent_from(doc.at("recurrent"));
  }
  return artifact;
}

std::shared_ptr<const forecast::Forecaster> make_forecaster(
    ModelArtifact artifact) {
  if (artifact.arch == "etr") {
    if (!artifact.etr) throw std::runtime_error("etr artifact missing trees");
    return std::make_shared<EtrForecaster>(std::move(*artifact.etr),
                                           artifact.scaling,
                                           artifact.lookback);
  }
  if (artifact.arch == "lstm" || artifact.arch == "bilstm") {
    if (!artifact.recurrent) {
      throw std::runtime_error("recurrent artifact missing parameters");
    }
    return std::make_shared<RecurrentForecaster>(std::move(*artifact.recurrent),
                                                 artifact.scaling);
  }
  throw std::runtime_error("unknown artifact arch '" + artifact.arch + "'");
}

}  // namespace gridwatch::artifact
