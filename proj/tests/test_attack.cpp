#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>
#include <vector>

#include "gridwatch/attack.hpp"
#include "gridwatch/data.hpp"

using namespace gridwatch;

TEST_CASE("scenario grid layout") {
  const auto grid = attack::scenario_grid();
  REQUIRE(grid.size() == 30);

  const auto at = [&](int id) { return grid[static_cast<std::size_t>(id - 1)]; };
  CHECK(at(1).dispersion_pct == 10.0);
  CHECK(at(1).intensity_pct == -10.0);
  CHECK(at(5).dispersion_pct == 10.0);
  CHECK(at(5).intensity_pct == -50.0);
  CHECK(at(11).dispersion_pct == 30.0);
  CHECK(at(11).intensity_pct == -10.0);
  CHECK(at(16).dispersion_pct == 10.0);
  CHECK(at(16).intensity_pct == 10.0);
  CHECK(at(30).dispersion_pct == 30.0);
  CHECK(at(30).intensity_pct == 50.0);

  std::set<std::pair<double, double>> pairs;
  for (const auto& s : grid) {
    CHECK(s.id >= 1);
    CHECK(s.id <= 30);
    pairs.insert({s.dispersion_pct, s.intensity_pct});
    CHECK(s.blackout_family() == (s.id <= 15));
  }
  CHECK(pairs.size() == 30);

  CHECK_THROWS_AS(attack::scenario_by_id(0), std::invalid_argument);
  CHECK_THROWS_AS(attack::scenario_by_id(31), std::invalid_argument);
}

TEST_CASE("inject flags exactly round(k% n) points") {
  const data::LoadSeries s = data::synth_load(5, 3);  // 120 points
  data::LoadSeries head = s;
  head.values.resize(100);

  const attack::LabeledSeries labeled =
      attack::inject(head, attack::scenario_by_id(1, 99));  // k=10
  CHECK(labeled.attacked_count() == 10);
  CHECK(labeled.labels.size() == 100);
  CHECK(labeled.clean.values == head.values);
}

TEST_CASE("inject applies the multiplicative intensity") {
  data::LoadSeries s;
  s.values.assign(10, 200.0);

  attack::AttackScenario up = attack::scenario_by_id(20, 7);  // (10, +50)
  up.dispersion_pct = 30.0;  // 3 of 10 points
  const attack::LabeledSeries plus = attack::inject(s, up);
  for (std::size_t i = 0; i < plus.labels.size(); ++i) {
    if (plus.labels[i]) {
      CHECK(plus.values.values[i] == doctest::Approx(300.0));
    } else {
      CHECK(plus.values.values[i] == 200.0);
    }
  }

  attack::AttackScenario down = up;
  down.intensity_pct = -50.0;
  const attack::LabeledSeries minus = attack::inject(s, down);
  for (std::size_t i = 0; i < minus.labels.size(); ++i) {
    if (minus.labels[i]) CHECK(minus.values.values[i] == doctest::Approx(100.0));
  }
}

TEST_CASE("inject is a pure function of (series, scenario)") {
  const data::LoadSeries s = data::synth_load(10, 8);
  const attack::AttackScenario scenario = attack::scenario_by_id(7, 1234);
  const attack::LabeledSeries a = attack::inject(s, scenario);
  const attack::LabeledSeries b = attack::inject(s, scenario);
  CHECK(a.labels == b.labels);
  CHECK(a.values.values == b.values.values);

  attack::AttackScenario reseeded = scenario;
  reseeded.seed = 4321;
  const attack::LabeledSeries c = attack::inject(s, reseeded);
  CHECK(c.attacked_count() == a.attacked_count());  // count is seed-invariant
  CHECK(c.labels != a.labels);
}

TEST_CASE("attacked-mean ratio equals 1 + p/100") {
  const data::LoadSeries s = data::synth_load(20, 5);
  for (int id : {2, 9, 14, 18, 25, 30}) {
    const attack::AttackScenario scenario = attack::scenario_by_id(id, 55);
    const attack::LabeledSeries labeled = attack::inject(s, scenario);
    double attacked_sum = 0.0, clean_sum = 0.0;
    for (std::size_t i = 0; i < labeled.labels.size(); ++i) {
      if (!labeled.labels[i]) continue;
      attacked_sum += labeled.values.values[i];
      clean_sum += labeled.clean.values[i];
    }
    CHECK(attacked_sum / clean_sum ==
          doctest::Approx(1.0 + scenario.intensity_pct / 100.0).epsilon(1e-12));
  }
}

TEST_CASE("inject rejects degenerate scenarios") {
  data::LoadSeries tiny;
  tiny.values.assign(3, 100.0);  // round(10% * 3) == 0
  CHECK_THROWS_AS(attack::inject(tiny, attack::scenario_by_id(1, 0)),
                  std::invalid_argument);
  data::LoadSeries empty;
  CHECK_THROWS_AS(attack::inject(empty, attack::scenario_by_id(1, 0)),
                  std::invalid_argument);
}

TEST_CASE("measurement noise leaves attacked points bit-identical") {
  const data::LoadSeries s = data::synth_load(10, 2);
  const attack::LabeledSeries labeled =
      attack::inject(s, attack::scenario_by_id(13, 3));
  const data::LoadSeries noisy =
      attack::add_measurement_noise(labeled.values, 0.02, 77, labeled.labels);
  for (std::size_t i = 0; i < labeled.labels.size(); ++i) {
    if (labeled.labels[i]) {
      CHECK(noisy.values[i] == labeled.values.values[i]);
    } else {
      CHECK(noisy.values[i] != labeled.values.values[i]);
    }
  }
}

TEST_CASE("sigma 0 noise is the identity") {
  const data::LoadSeries s = data::synth_load(3, 4);
  CHECK(attack::add_measurement_noise(s, 0.0, 5).values == s.values);
}

TEST_CASE("noise magnitude matches sigma empirically") {
  data::LoadSeries s = data::synth_load(90, 11);
  s.values.resize(2000);
  const data::LoadSeries noisy = attack::add_measurement_noise(s, 0.02, 13);
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double r = noisy.values[i] / s.values[i] - 1.0;
    sum += r;
    sumsq += r * r;
  }
  const double n = static_cast<double>(s.size());
  const double std_dev = std::sqrt((sumsq - sum * sum / n) / (n - 1.0));
  CHECK(std_dev > 0.018);
  CHECK(std_dev < 0.022);
}

TEST_CASE("labeled csv round-trips values and labels") {
  const data::LoadSeries s = data::synth_load(2, 6);
  const attack::LabeledSeries labeled =
      attack::inject(s, attack::scenario_by_id(21, 17));
  const auto path =
      (std::filesystem::temp_directory_path() / "gw_labeled.csv").string();
  attack::write_labeled_csv(labeled, path);
  const attack::LabeledSeries reread = attack::load_labeled_csv(path);
  CHECK(reread.labels == labeled.labels);
  REQUIRE(reread.values.size() == labeled.values.size());
  for (std::size_t i = 0; i < reread.values.size(); ++i) {
    CHECK(reread.values.values[i] ==
          doctest::Approx(labeled.values.values[i]).epsilon(1e-9));
  }
}
