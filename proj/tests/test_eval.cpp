#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <memory>
#include <vector>

#include "gridwatch/eval.hpp"
#include "oracle_helpers.hpp"

using namespace gridwatch;

namespace {

eval::SuiteConfig small_suite(std::uint64_t seed = 1) {
  eval::SuiteConfig config;
  config.series = data::synth_load(60, seed);  // 1440 points
  config.train_len = 840;
  config.stream_len = 600;
  config.warmup_len = 168;
  config.repetitions = 3;
  config.master_seed = seed;
  return config;
}

eval::DetectorVariant oracle_variant(const std::string& tag, double sigma) {
  return eval::DetectorVariant{
      tag, [sigma](const data::LoadSeries& clean, std::uint64_t seed) {
        return std::make_shared<forecast::OracleForecaster>(clean, sigma, seed);
      }};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("confusion counts per the definition table") {
  SUBCASE("perfect detector") {
    std::vector<bool> truth(50, false);
    for (int i = 0; i < 5; ++i) truth[static_cast<std::size_t>(i * 7)] = true;
    const eval::ConfusionMatrix cm = eval::confusion(truth, truth);
    CHECK(cm.tp == 5);
    CHECK(cm.tn == 45);
    CHECK(cm.fp == 0);
    CHECK(cm.fn == 0);
  }
  SUBCASE("null detector misses everything") {
    std::vector<bool> truth(50, false);
    for (int i = 0; i < 5; ++i) truth[static_cast<std::size_t>(i)] = true;
    const eval::ConfusionMatrix cm =
        eval::confusion(truth, std::vector<bool>(50, false));
    CHECK(cm.tp == 0);
    CHECK(cm.fn == 5);
    CHECK(cm.tn == 45);
  }
  SUBCASE("exhaustive recount on all 16-point labelings") {
    for (unsigned truth_bits = 0; truth_bits < 16; ++truth_bits) {
      for (unsigned flag_bits = 0; flag_bits < 16; ++flag_bits) {
        std::vector<bool> truth(4), flagged(4);
        for (unsigned i = 0; i < 4; ++i) {
          truth[i] = (truth_bits >> i) & 1u;
          flagged[i] = (flag_bits >> i) & 1u;
        }
        const eval::ConfusionMatrix cm = eval::confusion(truth, flagged);
        std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
        for (unsigned i = 0; i < 4; ++i) {
          tp += truth[i] && flagged[i];
          tn += !truth[i] && !flagged[i];
          fp += !truth[i] && flagged[i];
          fn += truth[i] && !flagged[i];
        }
        CHECK(cm.tp == tp);
        CHECK(cm.tn == tn);
        CHECK(cm.fp == fp);
        CHECK(cm.fn == fn);
        CHECK(cm.total() == 4);
      }
    }
  }
  SUBCASE("length mismatch throws") {
    CHECK_THROWS_AS(
        eval::confusion(std::vector<bool>{true}, std::vector<bool>{}),
        std::invalid_argument);
  }
}

TEST_CASE("metrics hand values and degenerate flags") {
  SUBCASE("worked example") {
    const eval::MetricSet m = eval::metrics(eval::ConfusionMatrix{8, 88, 2, 2});
    CHECK(*m.accuracy == doctest::Approx(0.96).epsilon(1e-12));
    CHECK(*m.precision == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(*m.sensitivity == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(*m.specificity == doctest::Approx(88.0 / 90.0).epsilon(1e-12));
    CHECK(*m.f1 == doctest::Approx(0.8).epsilon(1e-12));
  }
  SUBCASE("perfect detector scores all ones") {
    const eval::MetricSet m = eval::metrics(eval::ConfusionMatrix{10, 40, 0, 0});
    CHECK(*m.accuracy == 1.0);
    CHECK(*m.precision == 1.0);
    CHECK(*m.sensitivity == 1.0);
    CHECK(*m.specificity == 1.0);
    CHECK(*m.f1 == 1.0);
  }
  SUBCASE("tp = fp = 0 leaves precision undefined") {
    const eval::MetricSet m = eval::metrics(eval::ConfusionMatrix{0, 40, 0, 10});
    CHECK_FALSE(m.precision.has_value());
    CHECK(m.sensitivity.has_value());
    CHECK_FALSE(m.f1.has_value());
  }
  SUBCASE("empty matrix throws") {
    CHECK_THROWS_AS(eval::metrics(eval::ConfusionMatrix{}),
                    std::invalid_argument);
  }
}

TEST_CASE("metrics match the brute-force formulas on an exhaustive sweep") {
  // All confusion matrices with total <= 9 here; the acceptance suite goes
  // to 12.
  for (std::size_t tp = 0; tp <= 9; ++tp) {
    for (std::size_t tn = 0; tp + tn <= 9; ++tn) {
      for (std::size_t fp = 0; tp + tn + fp <= 9; ++fp) {
        for (std::size_t fn = 0; tp + tn + fp + fn <= 9; ++fn) {
          if (tp + tn + fp + fn == 0) continue;
          const eval::MetricSet got =
              eval::metrics(eval::ConfusionMatrix{tp, tn, fp, fn});
          const oracle::BruteMetrics want =
              oracle::brute_metrics(tp, tn, fp, fn);
          CHECK(got.accuracy.has_value() == want.accuracy.has_value());
          CHECK(got.precision.has_value() == want.precision.has_value());
          CHECK(got.sensitivity.has_value() == want.sensitivity.has_value());
          CHECK(got.specificity.has_value() == want.specificity.has_value());
          CHECK(got.f1.has_value() == want.f1.has_value());
          if (got.f1) {
            CHECK(*got.f1 == doctest::Approx(*want.f1).epsilon(1e-12));
            CHECK(*got.f1 ==
                  doctest::Approx(2.0 * *got.precision * *got.sensitivity /
                                  (*got.precision + *got.sensitivity))
                      .epsilon(1e-12));
          }
          if (got.accuracy) {
            CHECK(*got.accuracy ==
                  doctest::Approx(*want.accuracy).epsilon(1e-12));
          }
        }
      }
    }
  }
}

TEST_CASE("mean_metrics skips undefined entries") {
  eval::MetricSet a;
  a.accuracy = 0.9;
  a.f1 = 0.8;
  eval::MetricSet b;
  b.accuracy = 0.7;
  const eval::MetricSet mean = eval::mean_metrics({a, b});
  CHECK(*mean.accuracy == doctest::Approx(0.8));
  CHECK(*mean.f1 == doctest::Approx(0.8));  // only one defined value
  CHECK_FALSE(mean.precision.has_value());
}

TEST_CASE("run_suite produces one result per detector-scenario pair") {
  eval::SuiteConfig config = small_suite();
  config.repetitions = 3;
  const std::vector<eval::DetectorVariant> detectors{
      oracle_variant("EE-Oracle", 0.02), oracle_variant("EE-Sharp", 0.01),
      oracle_variant("EE-Blunt", 0.04)};
  const auto results =
      eval::run_suite(config, detectors, attack::scenario_grid());
  CHECK(results.size() == 90);  // 3 detectors x 30 scenarios
  std::size_t reps = 0;
  for (const auto& r : results) reps += r.reps.size();
  CHECK(reps == 270);  // x 3 repetitions
}

TEST_CASE("scenario 5 at 2 percent oracle noise is detected perfectly") {
  // Desk-size stream; the acceptance suite runs the full 2000-point version.
  eval::SuiteConfig config = small_suite(3);
  const auto results =
      eval::run_suite(config, {oracle_variant("EE-Oracle", 0.02)},
                      {attack::scenario_by_id(5)});
  REQUIRE(results.size() == 1);
  REQUIRE(results[0].mean.accuracy.has_value());
  CHECK(*results[0].mean.accuracy >= 0.995);
  CHECK(*results[0].mean.sensitivity == 1.0);  // every attacked point caught
  CHECK(*results[0].mean.f1 >= 0.97);
}

TEST_CASE("suite runs are deterministic and parallelism-invariant") {
  eval::SuiteConfig config = small_suite(7);
  config.stream_len = 400;
  config.repetitions = 2;
  const std::vector<attack::AttackScenario> scenarios{
      attack::scenario_by_id(1), attack::scenario_by_id(20)};
  const auto run = [&](int jobs) {
    eval::SuiteConfig c = config;
    c.jobs = jobs;
    return eval::run_suite(c, {oracle_variant("EE-Oracle", 0.02)}, scenarios);
  };
  const auto serial = run(1);
  const auto parallel = run(4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].scenario_id == parallel[i].scenario_id);
    CHECK(serial[i].mean.f1 == parallel[i].mean.f1);
    CHECK(serial[i].mean.accuracy == parallel[i].mean.accuracy);
    for (std::size_t r = 0; r < serial[i].reps.size(); ++r) {
      CHECK(serial[i].reps[r].cm.tp == parallel[i].reps[r].cm.tp);
      CHECK(serial[i].reps[r].cm.fp == parallel[i].reps[r].cm.fp);
    }
  }
}

TEST_CASE("rank: strict leader, universal tie, single scenario") {
  const auto mk = [](int sid, const std::string& det, double f1) {
    eval::ScenarioResult r;
    r.scenario_id = sid;
    r.detector = det;
    r.mean.f1 = f1;
    return r;
  };

  SUBCASE("leader counts and competition ranking") {
    std::vector<eval::ScenarioResult> results;
    for (int sid = 1; sid <= 30; ++sid) {
      results.push_back(mk(sid, "A", sid <= 24 ? 0.9 : 0.5));
      results.push_back(mk(sid, "B", 0.7));
    }
    const auto rows = eval::rank(results);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].detector == "A");
    CHECK(rows[0].leading == 24);
    CHECK(rows[0].rank == 1);
    CHECK(rows[1].detector == "B");
    CHECK(rows[1].leading == 6);
    CHECK(rows[1].rank == 2);
  }

  SUBCASE("ties award every tied detector") {
    std::vector<eval::ScenarioResult> results;
    for (int sid = 1; sid <= 30; ++sid) {
      for (const char* det : {"A", "B", "C"}) results.push_back(mk(sid, det, 0.8));
    }
    const auto rows = eval::rank(results);
    for (const auto& row : rows) {
      CHECK(row.leading == 30);
      CHECK(row.rank == 1);
    }
  }

  SUBCASE("single scenario strict leader") {
    const auto rows =
        eval::rank({mk(4, "A", 0.9), mk(4, "B", 0.2)});
    CHECK(rows[0].detector == "A");
    CHECK(rows[0].leading == 1);
    CHECK(rows[1].leading == 0);
    CHECK(rows[1].rank == 2);
  }

  SUBCASE("empty input throws") {
    CHECK_THROWS_AS(eval::rank({}), std::invalid_argument);
  }
}

TEST_CASE("suite report bundle is written with hash stamps") {
  eval::SuiteConfig config = small_suite(9);
  config.stream_len = 400;
  config.repetitions = 1;
  const auto results = eval::run_suite(
      config, {oracle_variant("EE-Oracle", 0.02)},
      {attack::scenario_by_id(2), attack::scenario_by_id(17)});

  const auto dir = std::filesystem::temp_directory_path() / "gw_report_test";
  std::filesystem::remove_all(dir);
  eval::write_suite_reports(dir.string(), results, "{\"probe\":1}", "abc123");

  for (const char* name :
       {"config.json", "suite_results.json", "table_blackout.csv",
        "table_blackout.txt", "table_economic.csv", "table_economic.txt",
        "ranking.csv", "ranking.txt", "plot_metrics.csv"}) {
    CAPTURE(name);
    CHECK(std::filesystem::exists(dir / name));
  }
  const std::string blackout = slurp(dir / "table_blackout.csv");
  CHECK(blackout.find("abc123") != std::string::npos);
  CHECK(blackout.find("\n2,") != std::string::npos);
  const std::string economic = slurp(dir / "table_economic.csv");
  CHECK(economic.find("\n17,") != std::string::npos);
}
