#pragma once

#include <memory>
#include <optional>
#include <string>

#include "gridwatch/data.hpp"
#include "gridwatch/etr.hpp"
#include "gridwatch/forecast.hpp"
#include "gridwatch/recurrent.hpp"

namespace gridwatch::artifact {

// Versioned JSON model artifact: architecture tag, shapes, parameters, the
// scaling transform, lookback, seed and training metadata. Self-contained
// for inference.
struct ModelArtifact {
  std::string arch;  // "etr" | "lstm" | "bilstm"
  std::size_t lookback = 14;
  data::ScalingTransform scaling;
  std::uint64_t seed = 0;
  std::size_t trained_rows = 0;
  std::optional<forecast::EtrModel> etr;
  std::optional<forecast::RecurrentParams> recurrent;
};

void save(const ModelArtifact& artifact, const std::string& path);
ModelArtifact load(const std::string& path);

// Wraps the artifact as a streaming one-step-ahead forecaster working in kW.
std::shared_ptr<const forecast::Forecaster> make_forecaster(
    ModelArtifact artifact);

}  // namespace gridwatch::artifact
