#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridwatch/data.hpp"

namespace gridwatch::attack {

// One cell of the 30-scenario grid: k percent of points scaled by p percent.
// Negative p targets blackouts, positive p targets economic loss.
struct AttackScenario {
  int id = 0;             // 1..30
  double dispersion_pct;  // k in {10, 20, 30}
  double intensity_pct;   // p in {+-10, ..., +-50}
  std::uint64_t seed = 0;

  bool blackout_family() const { return intensity_pct < 0.0; }
};

// Scenarios 1-15 sweep p = -10..-50 over k = 10, 20, 30; 16-30 the same with
// positive p. Scenario 1 = (10, -10), 5 = (10, -50), 16 = (10, +10).
std::vector<AttackScenario> scenario_grid();
AttackScenario scenario_by_id(int id, std::uint64_t seed = 0);

struct LabeledSeries {
  data::LoadSeries values;   // attacked readings as received
  std::vector<bool> labels;  // true = attacked
  data::LoadSeries clean;    // pre-attack readings

  std::size_t attacked_count() const;
};

// Scales exactly round(k% * n) uniformly chosen points by (1 + p/100).
LabeledSeries inject(const data::LoadSeries& series,
                     const AttackScenario& scenario);

// Multiplies non-excluded points by (1 + eta), eta ~ N(0, sigma); excluded
// (attacked) points pass through bit-identical.
data::LoadSeries add_measurement_noise(const data::LoadSeries& series,
                                       double sigma, std::uint64_t seed,
                                       const std::vector<bool>& exclude = {});

// `timestamp,load_kw,label` with label in {0,1}.
void write_labeled_csv(const LabeledSeries& labeled, const std::string& path);
LabeledSeries load_labeled_csv(const std::string& path);

}  // namespace gridwatch::attack
