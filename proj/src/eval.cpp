#include "gridwatch/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "gridwatch/seeding.hpp"
#include "gridwatch/version.hpp"

namespace gridwatch::eval {

namespace {

using nlohmann::json;

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string metric_cell(const std::optional<double>& m) {
  return m ? fmt(*m) : std::string();
}

std::string percent_cell(const std::optional<double>& m) {
  return m ? fmt(*m * 100.0, "%.2f%%") : std::string("n/a");
}

json metric_json(const std::optional<double>& m) {
  return m ? json(*m) : json(nullptr);
}

}  // namespace

ConfusionMatrix confusion(const std::vector<bool>& truth,
                          const std::vector<bool>& flagged) {
  if (truth.size() != flagged.size()) {
    throw std::invalid_argument("confusion length mismatch");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) {
      ++(flagged[i] ? cm.tp : cm.fn);
    } else {
      ++(flagged[i] ? cm.fp : cm.tn);
    }
  }
  return cm;
}

MetricSet metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw std::invalid_argument("empty confusion matrix");
  const auto tp = static_cast<double>(cm.tp);
  const auto tn = static_cast<double>(cm.tn);
  const auto fp = static_cast<double>(cm.fp);
  const auto fn = static_cast<double>(cm.fn);

  MetricSet m;
  m.accuracy = (tp + tn) / static_cast<double>(cm.total());
  if (cm.tp + cm.fp > 0) m.precision = tp / (tp + fp);
  if (cm.tp + cm.fn > 0) m.sensitivity = tp / (tp + fn);
  if (cm.tn + cm.fp > 0) m.specificity = tn / (tn + fp);
  if (m.precision && m.sensitivity && *m.precision + *m.sensitivity > 0.0) {
    m.f1 = 2.0 * *m.precision * *m.sensitivity /
           (*m.precision + *m.sensitivity);
  }
  return m;
}

MetricSet mean_metrics(const std::vector<MetricSet>& sets) {
  MetricSet mean;
  const auto average = [&sets](std::optional<double> MetricSet::* field)
      -> std::optional<double> {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& s : sets) {
      if (s.*field) {
        sum += *(s.*field);
        ++count;
      }
    }
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
  };
  mean.accuracy = average(&MetricSet::accuracy);
  mean.precision = average(&MetricSet::precision);
  mean.sensitivity = average(&MetricSet::sensitivity);
  mean.specificity = average(&MetricSet::specificity);
  mean.f1 = average(&MetricSet::f1);
  return mean;
}

namespace {

RepetitionResult run_one(const SuiteConfig& config,
                         const DetectorVariant& variant,
                         const attack::AttackScenario& scenario,
                         int repetition) {
  const auto k_tag =
      static_cast<std::uint64_t>(std::llround(scenario.dispersion_pct));
  const auto rep_tag = static_cast<std::uint64_t>(repetition);
  const std::uint64_t mask_seed =
      derive_seed(config.master_seed, variant.tag + "/mask", k_tag, rep_tag);
  const std::uint64_t noise_seed =
      derive_seed(config.master_seed, variant.tag + "/noise", k_tag, rep_tag);
  const std::uint64_t warm_noise_seed =
      derive_seed(config.master_seed, variant.tag + "/noise-warm", k_tag,
                  rep_tag);
  const std::uint64_t forecaster_seed =
      derive_seed(config.master_seed, variant.tag + "/forecaster", k_tag,
                  rep_tag);
  const std::uint64_t detector_seed =
      derive_seed(config.master_seed, variant.tag + "/detector", k_tag,
                  rep_tag);

  const auto& series = config.series;
  if (config.train_len < config.warmup_len + 1 ||
      config.train_len + config.stream_len > series.size()) {
    throw std::invalid_argument("suite split does not fit the series");
  }

  data::LoadSeries stream_clean;
  stream_clean.start = series.stamp_at(config.train_len);
  stream_clean.values.assign(
      series.values.begin() + static_cast<std::ptrdiff_t>(config.train_len),
      series.values.begin() +
          static_cast<std::ptrdiff_t>(config.train_len + config.stream_len));

  attack::AttackScenario seeded = scenario;
  seeded.seed = mask_seed;
  attack::LabeledSeries labeled = attack::inject(stream_clean, seeded);
  const data::LoadSeries received = attack::add_measurement_noise(
      labeled.values, config.noise_sigma, noise_seed, labeled.labels);

  auto forecaster = variant.make(series, forecaster_seed);
  detect::DetectorConfig det_config = config.detector;
  det_config.seed = detector_seed;

  const std::size_t warm_start = config.train_len - config.warmup_len;
  const std::size_t lookback = forecaster->lookback();
  const std::size_t seed_lo = warm_start >= lookback ? warm_start - lookback : 0;
  detect::Detector detector(
      forecaster, det_config, series.start, warm_start,
      std::span<const double>(series.values.data() + seed_lo,
                              warm_start - seed_lo));
  // The warm-up prefix passes through the same measurement channel as the
  // stream's non-attacked points.
  data::LoadSeries warm_slice;
  warm_slice.start = series.stamp_at(warm_start);
  warm_slice.values.assign(
      series.values.begin() + static_cast<std::ptrdiff_t>(warm_start),
      series.values.begin() + static_cast<std::ptrdiff_t>(config.train_len));
  const data::LoadSeries warm_received =
      attack::add_measurement_noise(warm_slice, config.noise_sigma,
                                    warm_noise_seed);
  detector.warm_up(warm_received.values);
  const std::vector<detect::StepOutcome> outcomes =
      detector.run_stream(received.values);

  std::vector<bool> flagged(outcomes.size());
  RepetitionResult result;
  result.repetition = repetition;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    flagged[i] = outcomes[i].flagged();
    if (outcomes[i].flagged() &&
        outcomes[i].passed == outcomes[i].received &&
        outcomes[i].received != outcomes[i].forecast) {
      ++result.substitution_violations;
    }
  }
  result.cm = confusion(labeled.labels, flagged);
  result.metrics = metrics(result.cm);
  return result;
}

}  // namespace

std::vector<ScenarioResult> run_suite(
    const SuiteConfig& config, const std::vector<DetectorVariant>& detectors,
    const std::vector<attack::AttackScenario>& scenarios) {
  if (config.repetitions < 1) {
    throw std::invalid_argument("repetitions must be >= 1");
  }
  if (detectors.empty() || scenarios.empty()) {
    throw std::invalid_argument("suite needs detectors and scenarios");
  }

  struct Task {
    std::size_t detector;
    std::size_t scenario;
    int repetition;
  };
  std::vector<Task> tasks;
  for (std::size_t d = 0; d < detectors.size(); ++d) {
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
      for (int r = 0; r < config.repetitions; ++r) {
        tasks.push_back(Task{d, s, r});
      }
    }
  }

  std::vector<RepetitionResult> rep_results(tasks.size());
  const int jobs = std::max(1, config.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      rep_results[i] = run_one(config, detectors[tasks[i].detector],
                               scenarios[tasks[i].scenario],
                               tasks[i].repetition);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> workers;
    workers.reserve(static_cast<std::size_t>(jobs));
    for (int w = 0; w < jobs; ++w) {
      workers.push_back(std::async(std::launch::async, [&]() {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= tasks.size()) return;
          rep_results[i] = run_one(config, detectors[tasks[i].detector],
                                   scenarios[tasks[i].scenario],
                                   tasks[i].repetition);
        }
      }));
    }
    for (auto& w : workers) w.get();
  }

  std::vector<ScenarioResult> results;
  results.reserve(detectors.size() * scenarios.size());
  std::size_t task_index = 0;
  for (std::size_t d = 0; d < detectors.size(); ++d) {
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
      ScenarioResult sr;
      sr.scenario_id = scenarios[s].id;
      sr.dispersion_pct = scenarios[s].dispersion_pct;
      sr.intensity_pct = scenarios[s].intensity_pct;
      sr.detector = detectors[d].tag;
      std::vector<MetricSet> sets;
      for (int r = 0; r < config.repetitions; ++r) {
        sr.reps.push_back(rep_results[task_index++]);
        sets.push_back(sr.reps.back().metrics);
      }
      sr.mean = mean_metrics(sets);
      results.push_back(std::move(sr));
    }
  }
  return results;
}

std::vector<RankingRow> rank(const std::vector<ScenarioResult>& results) {
  if (results.empty()) throw std::invalid_argument("rank needs results");

  std::vector<std::string> detectors;
  std::vector<int> scenario_ids;
  for (const auto& r : results) {
    if (std::find(detectors.begin(), detectors.end(), r.detector) ==
        detectors.end()) {
      detectors.push_back(r.detector);
    }
    if (std::find(scenario_ids.begin(), scenario_ids.end(), r.scenario_id) ==
        scenario_ids.end()) {
      scenario_ids.push_back(r.scenario_id);
    }
  }

  std::map<std::string, int> leading;
  for (const auto& d : detectors) leading[d] = 0;
  for (int sid : scenario_ids) {
    double best = -1.0;
    for (const auto& r : results) {
      if (r.scenario_id == sid && r.mean.f1 && *r.mean.f1 > best) {
        best = *r.mean.f1;
      }
    }
    if (best < 0.0) continue;  // f1 undefined for every detector
    for (const auto& r : results) {
      if (r.scenario_id == sid && r.mean.f1 && *r.mean.f1 == best) {
        ++leading[r.detector];
      }
    }
  }

  std::vector<RankingRow> rows;
  for (const auto& d : detectors) rows.push_back(RankingRow{d, leading[d], 0});
  std::stable_sort(rows.begin(), rows.end(),
                   [](const RankingRow& a, const RankingRow& b) {
                     return a.leading > b.leading;
                   });
  for (auto& row : rows) {
    int higher = 0;
    for (const auto& other : rows) {
      if (other.leading > row.leading) ++higher;
    }
    row.rank = higher + 1;
  }
  return rows;
}

namespace {

void write_family_table(const std::filesystem::path& dir,
                        const std::string& family_name, int id_lo, int id_hi,
                        const std::vector<ScenarioResult>& results,
                        const std::vector<std::string>& detectors,
                        const std::string& stamp) {
  const auto find_result =
      [&](int sid, const std::string& det) -> const ScenarioResult* {
    for (const auto& r : results) {
      if (r.scenario_id == sid && r.detector == det) return &r;
    }
    return nullptr;
  };

  // CSV: one row per (scenario, detector) with all five means.
  {
    std::ofstream out(dir / ("table_" + family_name + ".csv"),
                      std::ios::binary);
    out << "# " << stamp << '\n';
    out << "scenario,k_pct,p_pct,detector,accuracy,precision,sensitivity,"
           "specificity,f1\n";
    for (int sid = id_lo; sid <= id_hi; ++sid) {
      for (const auto& det : detectors) {
        const ScenarioResult* r = find_result(sid, det);
        if (r == nullptr) continue;
        out << sid << ',' << fmt(r->dispersion_pct, "%.0f") << ','
            << fmt(r->intensity_pct, "%.0f") << ',' << det << ','
            << metric_cell(r->mean.accuracy) << ','
            << metric_cell(r->mean.precision) << ','
            << metric_cell(r->mean.sensitivity) << ','
            << metric_cell(r->mean.specificity) << ','
            << metric_cell(r->mean.f1) << '\n';
      }
    }
  }

  // Text table: accuracy / specificity / f1 per detector, percent form.
  {
    std::ofstream out(dir / ("table_" + family_name + ".txt"),
                      std::ios::binary);
    out << "# " << stamp << '\n';
    out << "Scenario";
    for (const auto& det : detectors) {
      out << " | " << det << " acc/spec/f1";
    }
    out << '\n';
    for (int sid = id_lo; sid <= id_hi; ++sid) {
      bool any = false;
      std::string line = std::to_string(sid);
      for (const auto& det : detectors) {
        const ScenarioResult* r = find_result(sid, det);
        if (r == nullptr) continue;
        any = true;
        line += " | " + percent_cell(r->mean.accuracy) + " " +
                percent_cell(r->mean.specificity) + " " +
                percent_cell(r->mean.f1);
      }
      if (any) out << line << '\n';
    }
  }
}

}  // namespace

void write_suite_reports(const std::string& out_dir,
                         const std::vector<ScenarioResult>& results,
                         const std::string& config_json,
                         const std::string& config_hash) {
  namespace fs = std::filesystem;
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  const std::string stamp =
      "config_hash=" + config_hash + " version=" + std::string(kVersion);

  std::vector<std::string> detectors;
  for (const auto& r : results) {
    if (std::find(detectors.begin(), detectors.end(), r.detector) ==
        detectors.end()) {
      detectors.push_back(r.detector);
    }
  }

  {
    std::ofstream out(dir / "config.json", std::ios::binary);
    out << config_json << '\n';
  }

  {
    json doc;
    doc["config_hash"] = config_hash;
    doc["version"] = std::string(kVersion);
    try {
      doc["config"] = json::parse(config_json);
    } catch (const json::parse_error&) {
      doc["config"] = config_json;  // keep opaque text rather than losing it
    }
    json rows = json::array();
    for (const auto& r : results) {
      json row;
      row["scenario"] = r.scenario_id;
      row["k_pct"] = r.dispersion_pct;
      row["p_pct"] = r.intensity_pct;
      row["detector"] = r.detector;
      json reps = json::array();
      for (const auto& rep : r.reps) {
        json j;
        j["repetition"] = rep.repetition;
        j["tp"] = rep.cm.tp;
        j["tn"] = rep.cm.tn;
        j["fp"] = rep.cm.fp;
        j["fn"] = rep.cm.fn;
        j["accuracy"] = metric_json(rep.metrics.accuracy);
        j["precision"] = metric_json(rep.metrics.precision);
        j["sensitivity"] = metric_json(rep.metrics.sensitivity);
        j["specificity"] = metric_json(rep.metrics.specificity);
        j["f1"] = metric_json(rep.metrics.f1);
        j["substitution_violations"] = rep.substitution_violations;
        reps.push_back(std::move(j));
      }
      row["repetitions"] = std::move(reps);
      row["mean"] = {{"accuracy", metric_json(r.mean.accuracy)},
                     {"precision", metric_json(r.mean.precision)},
                     {"sensitivity", metric_json(r.mean.sensitivity)},
                     {"specificity", metric_json(r.mean.specificity)},
                     {"f1", metric_json(r.mean.f1)}};
      rows.push_back(std::move(row));
    }
    doc["results"] = std::move(rows);
    std::ofstream out(dir / "suite_results.json", std::ios::binary);
    out << doc.dump(2) << '\n';
  }

  write_family_table(dir, "blackout", 1, 15, results, detectors, stamp);
  write_family_table(dir, "economic", 16, 30, results, detectors, stamp);

  {
    const std::vector<RankingRow> ranking = rank(results);
    std::ofstream csv(dir / "ranking.csv", std::ios::binary);
    csv << "# " << stamp << '\n';
    csv << "detector,leading_scenarios,rank\n";
    for (const auto& row : ranking) {
      csv << row.detector << ',' << row.leading << ',' << row.rank << '\n';
    }
    std::ofstream txt(dir / "ranking.txt", std::ios::binary);
    txt << "# " << stamp << '\n';
    txt << "Detector | Leading scenarios | Rank\n";
    for (const auto& row : ranking) {
      txt << row.detector << " | " << row.leading << " | " << row.rank << '\n';
    }
  }

  {
    std::ofstream out(dir / "plot_metrics.csv", std::ios::binary);
    out << "# " << stamp << '\n';
    out << "scenario,k_pct,p_pct,detector,metric,value\n";
    const auto emit = [&](const ScenarioResult& r, const char* name,
                          const std::optional<double>& v) {
      if (!v) return;
      out << r.scenario_id << ',' << fmt(r.dispersion_pct, "%.0f") << ','
          << fmt(r.intensity_pct, "%.0f") << ',' << r.detector << ',' << name
          << ',' << fmt(*v) << '\n';
    };
    for (const auto& r : results) {
      emit(r, "accuracy", r.mean.accuracy);
      emit(r, "precision", r.mean.precision);
      emit(r, "sensitivity", r.mean.sensitivity);
      emit(r, "specificity", r.mean.specificity);
      emit(r, "f1", r.mean.f1);
    }
  }
}

}  // namespace gridwatch::eval
