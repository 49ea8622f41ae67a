// gridwatch: load-stream integrity monitoring.
//
// Subcommands wire ingestion, training, attack generation, online detection
// and the scenario evaluation suite into reproducible seeded runs. Exit
// codes: 0 success, 1 usage error, 2 data error, 3 runtime/numeric error.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridwatch/artifact.hpp"
#include "gridwatch/attack.hpp"
#include "gridwatch/data.hpp"
#include "gridwatch/detect.hpp"
#include "gridwatch/etr.hpp"
#include "gridwatch/eval.hpp"
#include "gridwatch/forecast.hpp"
#include "gridwatch/recurrent.hpp"
#include "gridwatch/robust.hpp"
#include "gridwatch/seeding.hpp"
#include "gridwatch/version.hpp"

namespace {

using json = nlohmann::json;
using namespace gridwatch;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

// --config files provide defaults; command-line flags win. The file is read
// before CLI11 parses, so option defaults come from it.
json load_config_file(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string_view(argv[i]) == "--config") {
      std::ifstream in(argv[i + 1]);
      if (!in) {
        throw data::ParseError(0, std::string("cannot open config '") +
                                      argv[i + 1] + "'");
      }
      json doc;
      in >> doc;
      return doc;
    }
  }
  return json::object();
}

template <typename T>
T cfg_or(const json& cfg, const char* pointer, T fallback) {
  const json::json_pointer ptr(pointer);
  if (cfg.contains(ptr)) return cfg.at(ptr).get<T>();
  return fallback;
}

struct DataFlags {
  std::string csv_path;
  int synth_days = 0;
  std::uint64_t synth_seed = 1;
  data::SynthProfile profile;
};

void add_data_flags(CLI::App* cmd, DataFlags& flags, const json& cfg) {
  flags.csv_path = cfg_or<std::string>(cfg, "/data/path", "");
  flags.synth_days = cfg_or<int>(cfg, "/data/days", 0);
  flags.synth_seed = cfg_or<std::uint64_t>(cfg, "/data/seed", 1);
  cmd->add_option("--data", flags.csv_path, "input CSV (timestamp,load_kw)");
  cmd->add_option("--synth-days", flags.synth_days,
                  "generate a synthetic series of this many days instead");
  cmd->add_option("--synth-seed", flags.synth_seed, "synthetic series seed");
}

data::LoadSeries resolve_series(const DataFlags& flags) {
  if (!flags.csv_path.empty()) return data::load_csv(flags.csv_path);
  if (flags.synth_days > 0) {
    return data::synth_load(flags.synth_days, flags.synth_seed, flags.profile);
  }
  throw CLI::ValidationError("data", "provide --data or --synth-days");
}

struct EnvelopeFlags {
  detect::DetectorConfig config;
};

void add_envelope_flags(CLI::App* cmd, EnvelopeFlags& flags, const json& cfg) {
  auto& c = flags.config;
  c.warmup_min = cfg_or<std::size_t>(cfg, "/envelope/warmup", c.warmup_min);
  c.window = cfg_or<std::size_t>(cfg, "/envelope/window", c.window);
  c.contamination =
      cfg_or<double>(cfg, "/envelope/contamination", c.contamination);
  c.c_min = cfg_or<double>(cfg, "/envelope/c_min", c.c_min);
  c.c_max = cfg_or<double>(cfg, "/envelope/c_max", c.c_max);
  c.refit_tolerance =
      cfg_or<double>(cfg, "/envelope/refit_tolerance", c.refit_tolerance);
  c.refit_cadence =
      cfg_or<std::size_t>(cfg, "/envelope/refit_cadence", c.refit_cadence);
  c.support_fraction =
      cfg_or<double>(cfg, "/envelope/support_fraction", c.support_fraction);
  c.envelope_dim = cfg_or<std::size_t>(cfg, "/envelope/dim", c.envelope_dim);
  c.refit_cutoff_sigmas =
      cfg_or<double>(cfg, "/envelope/cutoff_sigmas", c.refit_cutoff_sigmas);
  cmd->add_option("--warmup", c.warmup_min, "clean warm-up length (hours)");
  cmd->add_option("--window", c.window, "trailing residual window (hours)");
  cmd->add_option("--contamination", c.contamination,
                  "initial envelope contamination");
  cmd->add_option("--c-min", c.c_min, "contamination floor");
  cmd->add_option("--c-max", c.c_max, "contamination ceiling");
  cmd->add_option("--refit-tolerance", c.refit_tolerance,
                  "contamination change that forces a refit");
  cmd->add_option("--refit-cadence", c.refit_cadence,
                  "accepted points between routine refits");
  cmd->add_option("--support", c.support_fraction, "MCD support fraction");
  cmd->add_option("--envelope-dim", c.envelope_dim,
                  "stacked residual window fed to the envelope");
  cmd->add_option("--cutoff-sigmas", c.refit_cutoff_sigmas,
                  "exceedance cutoff in warm-up residual sigmas");
}

std::string summary_line(const data::LoadSeries& s) {
  double lo = s.values[0], hi = s.values[0], sum = 0.0;
  for (double v : s.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "%zu rows, %s .. %s, mean %.1f kW, min %.1f, max %.1f",
                s.size(), data::format_timestamp(s.start).c_str(),
                data::format_timestamp(s.stamp_at(s.size() - 1)).c_str(),
                sum / static_cast<double>(s.size()), lo, hi);
  return buf;
}

// One-step-ahead predictions over series[from..), using actual history as
// the input window at every step.
std::vector<double> one_step_predictions(const forecast::Forecaster& model,
                                         const data::LoadSeries& series,
                                         std::size_t from) {
  const std::size_t lookback = std::max<std::size_t>(model.lookback(), 1);
  if (from < lookback) {
    throw std::invalid_argument("not enough history before the test region");
  }
  std::vector<double> preds;
  preds.reserve(series.size() - from);
  for (std::size_t t = from; t < series.size(); ++t) {
    preds.push_back(model.forecast(
        t, std::span<const double>(series.values.data() + t - lookback,
                                   lookback)));
  }
  return preds;
}

void print_forecast_quality(const char* tag, std::span<const double> actual,
                            std::span<const double> predicted) {
  std::printf("%s: MAPE %.3f%%  RMSE(load-weighted) %.4f  RMSE %.2f kW\n", tag,
              100.0 * forecast::mape(actual, predicted),
              forecast::rmse_paper(actual, predicted),
              forecast::rmse_standard(actual, predicted));
}

int cmd_synth(const DataFlags& data_flags, int days, std::uint64_t seed,
              const std::string& out) {
  data::SynthProfile profile = data_flags.profile;
  const data::LoadSeries series = data::synth_load(days, seed, profile);
  data::write_csv(series, out);
  std::printf("wrote %s: %s\n", out.c_str(), summary_line(series).c_str());
  return 0;
}

struct TrainFlags {
  std::string model = "etr";
  std::string out = "model.json";
  std::string report_path;
  std::size_t lookback = 14;
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
  forecast::EtrHyperparams etr;
  forecast::TrainConfig recurrent;
};

int cmd_train(const DataFlags& data_flags, const TrainFlags& flags) {
  const data::LoadSeries series = resolve_series(data_flags);
  const auto [train, test] =
      data::split(series, data::fraction_split(series, flags.train_fraction));
  const data::WindowedDataset dataset =
      data::build_windows(train, flags.lookback);

  artifact::ModelArtifact art;
  art.arch = flags.model;
  art.lookback = flags.lookback;
  art.scaling = dataset.scaling;
  art.seed = flags.seed;
  art.trained_rows = dataset.size();

  std::vector<double> loss_curve;
  if (flags.model == "etr") {
    art.etr = forecast::train_etr(dataset, flags.etr, flags.seed);
  } else {
    forecast::TrainConfig config = flags.recurrent;
    config.seed = flags.seed;
    forecast::TrainResult result = forecast::train_recurrent(
        dataset, config, forecast::arch_from_name(flags.model));
    loss_curve = std::move(result.loss_curve);
    art.recurrent = std::move(result.params);
    std::printf("trained %s: epoch loss %.6f -> %.6f\n", flags.model.c_str(),
                loss_curve.front(), loss_curve.back());
  }
  artifact::save(art, flags.out);

  const auto model = artifact::make_forecaster(artifact::load(flags.out));
  const std::size_t test_begin = train.size();
  const std::vector<double> preds =
      one_step_predictions(*model, series, test_begin);
  const std::span<const double> actual(series.values.data() + test_begin,
                                       series.size() - test_begin);
  print_forecast_quality("test split", actual, preds);
  std::printf("artifact: %s\n", flags.out.c_str());

  if (!flags.report_path.empty()) {
    json cfg;
    cfg["command"] = "train";
    cfg["model"] = flags.model;
    cfg["seed"] = flags.seed;
    cfg["lookback"] = flags.lookback;
    json report;
    report["version"] = std::string(kVersion);
    report["config_hash"] = config_hash(cfg.dump());
    report["model"] = flags.model;
    report["mape"] = forecast::mape(actual, preds);
    report["rmse_load_weighted"] = forecast::rmse_paper(actual, preds);
    report["rmse_kw"] = forecast::rmse_standard(actual, preds);
    report["loss_curve"] = loss_curve;
    report["test_points"] = actual.size();
    std::ofstream out(flags.report_path, std::ios::binary);
    out << report.dump(2) << '\n';
  }
  return 0;
}

int cmd_forecast(const DataFlags& data_flags, const std::string& artifact_path,
                 const std::string& out) {
  const data::LoadSeries series = resolve_series(data_flags);
  const auto model = artifact::make_forecaster(artifact::load(artifact_path));
  const std::size_t from = std::max<std::size_t>(model->lookback(), 1);
  const std::span<const double> actual(series.values.data() + from,
                                       series.size() - from);
  const forecast::ForecastReport report = forecast::evaluate_predictions(
      actual, one_step_predictions(*model, series, from));

  json cfg;
  cfg["command"] = "forecast";
  cfg["artifact"] = artifact_path;
  cfg["data"] = data_flags.csv_path;

  std::ofstream file(out, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write '" + out + "'");
  file << "# config_hash=" << config_hash(cfg.dump()) << " version="
       << kVersion << '\n';
  file << "timestamp,actual_kw,predicted_kw\n";
  char buf[96];
  for (std::size_t i = 0; i < report.predictions.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f", series.values[from + i],
                  report.predictions[i]);
    file << data::format_timestamp(series.stamp_at(from + i)) << ',' << buf
         << '\n';
  }
  std::printf("forecast: MAPE %.3f%%  RMSE(load-weighted) %.4f  RMSE %.2f kW\n",
              100.0 * report.mape, report.rmse_paper, report.rmse_standard);
  return 0;
}

int cmd_attack(const DataFlags& data_flags, int scenario_id,
               std::uint64_t seed, double noise_sigma,
               std::uint64_t noise_seed, const std::string& out) {
  const data::LoadSeries series = resolve_series(data_flags);
  attack::LabeledSeries labeled =
      attack::inject(series, attack::scenario_by_id(scenario_id, seed));
  if (noise_sigma > 0.0) {
    labeled.values = attack::add_measurement_noise(labeled.values, noise_sigma,
                                                   noise_seed, labeled.labels);
  }
  attack::write_labeled_csv(labeled, out);
  std::printf("scenario %d: %zu of %zu points attacked -> %s\n", scenario_id,
              labeled.attacked_count(), labeled.values.size(), out.c_str());
  return 0;
}

struct DetectFlags {
  std::string artifact_path;
  double oracle_sigma = -1.0;
  std::uint64_t oracle_seed = 1;
  std::string history_path;
  std::string stream_path;
  std::string clean_path;
  std::string out_dir = "detect-out";
  std::uint64_t seed = 1;
};

int cmd_detect(const DetectFlags& flags, EnvelopeFlags& envelope) {
  const data::LoadSeries history = data::load_csv(flags.history_path);

  // The stream may carry ground-truth labels or be a plain series.
  attack::LabeledSeries stream;
  {
    std::ifstream probe(flags.stream_path);
    if (!probe) throw data::ParseError(0, "cannot open '" + flags.stream_path + "'");
    std::string header;
    std::getline(probe, header);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    probe.close();
    if (header == "timestamp,load_kw,label") {
      stream = attack::load_labeled_csv(flags.stream_path);
    } else {
      stream.values = data::load_csv(flags.stream_path);
      stream.clean = stream.values;
    }
  }
  if (stream.values.start != history.stamp_at(history.size() - 1) + 1) {
    throw data::ParseError(0, "stream does not continue the history series");
  }

  std::shared_ptr<const forecast::Forecaster> model;
  if (!flags.artifact_path.empty()) {
    model = artifact::make_forecaster(artifact::load(flags.artifact_path));
  } else if (flags.oracle_sigma >= 0.0) {
    data::LoadSeries clean = history;
    const data::LoadSeries tail = flags.clean_path.empty()
                                      ? stream.clean
                                      : data::load_csv(flags.clean_path);
    clean.values.insert(clean.values.end(), tail.values.begin(),
                        tail.values.end());
    model = std::make_shared<forecast::OracleForecaster>(clean,
                                                         flags.oracle_sigma,
                                                         flags.oracle_seed);
  } else {
    throw CLI::ValidationError("detect",
                               "provide --artifact or --oracle-sigma");
  }

  detect::DetectorConfig config = envelope.config;
  config.seed = flags.seed;
  if (history.size() < config.warmup_min) {
    throw std::invalid_argument("history shorter than the warm-up length");
  }
  const std::size_t warm_start = history.size() - config.warmup_min;
  const std::size_t lookback = model->lookback();
  const std::size_t seed_lo = warm_start >= lookback ? warm_start - lookback : 0;
  detect::Detector detector(
      model, config, history.start, warm_start,
      std::span<const double>(history.values.data() + seed_lo,
                              warm_start - seed_lo));
  detector.warm_up(std::span<const double>(history.values.data() + warm_start,
                                           config.warmup_min));
  const std::vector<detect::StepOutcome> outcomes =
      detector.run_stream(stream.values.values);

  namespace fs = std::filesystem;
  fs::create_directories(flags.out_dir);
  json cfg;
  cfg["command"] = "detect";
  cfg["seed"] = flags.seed;
  cfg["warmup"] = config.warmup_min;
  cfg["stream"] = flags.stream_path;
  const std::string hash = config_hash(cfg.dump());
  const std::string stamp =
      "config_hash=" + hash + " version=" + std::string(kVersion);
  detect::write_outcomes_csv(outcomes,
                             (fs::path(flags.out_dir) / "outcomes.csv").string(),
                             stamp);
  detect::write_outcomes_jsonl(
      outcomes, (fs::path(flags.out_dir) / "outcomes.jsonl").string(), hash,
      std::string(kVersion));

  std::size_t flagged = 0;
  for (const auto& o : outcomes) flagged += o.flagged() ? 1 : 0;
  std::printf("stream: %zu points, %zu flagged, contamination %.4f, %zu refits\n",
              outcomes.size(), flagged, detector.contamination(),
              detector.refit_count());
  if (!stream.labels.empty()) {
    std::vector<bool> decisions(outcomes.size());
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      decisions[i] = outcomes[i].flagged();
    }
    const eval::ConfusionMatrix cm = eval::confusion(stream.labels, decisions);
    const eval::MetricSet m = eval::metrics(cm);
    std::printf("tp %zu  fp %zu  fn %zu  tn %zu\n", cm.tp, cm.fp, cm.fn, cm.tn);
    const auto pct = [](const std::optional<double>& v) {
      return v ? *v * 100.0 : -1.0;
    };
    std::printf(
        "accuracy %.2f%%  precision %.2f%%  sensitivity %.2f%%  specificity "
        "%.2f%%  f1 %.2f%%\n",
        pct(m.accuracy), pct(m.precision), pct(m.sensitivity),
        pct(m.specificity), pct(m.f1));
  }
  return 0;
}

struct EvaluateFlags {
  std::vector<std::string> detectors{"ee-oracle"};
  double oracle_sigma = 0.02;
  std::string scenarios = "all";
  int repetitions = 3;
  std::size_t stream_len = 2000;
  std::size_t warmup = 168;
  double noise_sigma = 0.02;
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string out_dir = "evaluate-out";
};

std::vector<attack::AttackScenario> parse_scenarios(const std::string& spec) {
  if (spec == "all") return attack::scenario_grid();
  std::vector<attack::AttackScenario> picked;
  std::size_t pos = 0;
  while (pos < spec.size()) {
    const auto comma = spec.find(',', pos);
    const std::string token =
        spec.substr(pos, comma == std::string::npos ? spec.npos : comma - pos);
    picked.push_back(attack::scenario_by_id(std::stoi(token)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (picked.empty()) {
    throw CLI::ValidationError("scenarios", "no scenarios selected");
  }
  return picked;
}

int cmd_evaluate(const DataFlags& data_flags, const EvaluateFlags& flags,
                 EnvelopeFlags& envelope) {
  if (flags.repetitions < 1) {
    throw CLI::ValidationError("reps", "repetitions must be >= 1");
  }
  eval::SuiteConfig config;
  config.series = resolve_series(data_flags);
  config.train_len = static_cast<std::size_t>(std::llround(
      flags.train_fraction * static_cast<double>(config.series.size())));
  config.stream_len = flags.stream_len;
  config.warmup_len = flags.warmup;
  config.noise_sigma = flags.noise_sigma;
  config.repetitions = flags.repetitions;
  config.master_seed = flags.seed;
  config.detector = envelope.config;
  config.jobs = flags.jobs;

  std::vector<eval::DetectorVariant> variants;
  for (const std::string& spec : flags.detectors) {
    const auto colon = spec.find(':');
    const std::string name = spec.substr(0, colon);
    if (name == "ee-oracle") {
      const double sigma = flags.oracle_sigma;
      variants.push_back(eval::DetectorVariant{
          "EE-Oracle",
          [sigma](const data::LoadSeries& clean, std::uint64_t seed) {
            return std::make_shared<forecast::OracleForecaster>(clean, sigma,
                                                                seed);
          }});
    } else if (name == "ee-etr" || name == "ee-lstm" || name == "ee-bilstm") {
      if (colon == std::string::npos) {
        throw CLI::ValidationError(
            "detector", name + " needs a model artifact: " + name + ":path");
      }
      const std::string path = spec.substr(colon + 1);
      auto model = artifact::make_forecaster(artifact::load(path));
      std::string tag = "EE-" +
                        std::string(name == "ee-etr"
                                        ? "ETR"
                                        : (name == "ee-lstm" ? "LSTM"
                                                             : "BiLSTM"));
      variants.push_back(eval::DetectorVariant{
          std::move(tag),
          [model](const data::LoadSeries&, std::uint64_t) { return model; }});
    } else {
      throw CLI::ValidationError("detector", "unknown detector '" + name + "'");
    }
  }

  const std::vector<attack::AttackScenario> scenarios =
      parse_scenarios(flags.scenarios);

  // Canonical resolved config; the output directory and job count do not
  // affect results and stay out of the hash.
  json resolved;
  resolved["version"] = std::string(kVersion);
  resolved["seed"] = flags.seed;
  resolved["data"] = {{"path", data_flags.csv_path},
                      {"days", data_flags.synth_days},
                      {"seed", data_flags.synth_seed}};
  resolved["split"] = {{"train_fraction", flags.train_fraction}};
  resolved["suite"] = {{"scenarios", flags.scenarios},
                       {"repetitions", flags.repetitions},
                       {"stream_length", flags.stream_len},
                       {"warmup", flags.warmup},
                       {"noise_sigma", flags.noise_sigma},
                       {"oracle_sigma", flags.oracle_sigma},
                       {"detectors", flags.detectors}};
  resolved["envelope"] = {
      {"window", envelope.config.window},
      {"contamination", envelope.config.contamination},
      {"c_min", envelope.config.c_min},
      {"c_max", envelope.config.c_max},
      {"refit_tolerance", envelope.config.refit_tolerance},
      {"refit_cadence", envelope.config.refit_cadence},
      {"support_fraction", envelope.config.support_fraction},
      {"dim", envelope.config.envelope_dim},
      {"cutoff_sigmas", envelope.config.refit_cutoff_sigmas}};
  const std::string config_dump = resolved.dump(2);

  const auto results = eval::run_suite(config, variants, scenarios);
  eval::write_suite_reports(flags.out_dir, results, config_dump,
                            config_hash(config_dump));

  std::printf("suite: %zu scenario results x %d repetitions -> %s\n",
              results.size(), flags.repetitions, flags.out_dir.c_str());
  for (const auto& row : eval::rank(results)) {
    std::printf("%-12s leading %2d  rank %d\n", row.detector.c_str(),
                row.leading, row.rank);
  }
  return 0;
}

int cmd_report(const std::string& suite_json, const std::string& out_dir) {
  std::ifstream in(suite_json);
  if (!in) throw data::ParseError(0, "cannot open '" + suite_json + "'");
  json doc;
  in >> doc;

  std::vector<eval::ScenarioResult> results;
  for (const auto& row : doc.at("results")) {
    eval::ScenarioResult r;
    r.scenario_id = row.at("scenario").get<int>();
    r.dispersion_pct = row.at("k_pct").get<double>();
    r.intensity_pct = row.at("p_pct").get<double>();
    r.detector = row.at("detector").get<std::string>();
    std::vector<eval::MetricSet> sets;
    for (const auto& rep : row.at("repetitions")) {
      eval::RepetitionResult rr;
      rr.repetition = rep.at("repetition").get<int>();
      rr.cm = eval::ConfusionMatrix{
          rep.at("tp").get<std::size_t>(), rep.at("tn").get<std::size_t>(),
          rep.at("fp").get<std::size_t>(), rep.at("fn").get<std::size_t>()};
      rr.metrics = eval::metrics(rr.cm);
      rr.substitution_violations =
          rep.at("substitution_violations").get<std::size_t>();
      sets.push_back(rr.metrics);
      r.reps.push_back(std::move(rr));
    }
    r.mean = eval::mean_metrics(sets);
    results.push_back(std::move(r));
  }
  const std::string config_dump =
      doc.contains("config") ? doc.at("config").dump(2) : std::string("{}");
  eval::write_suite_reports(out_dir, results, config_dump,
                            doc.at("config_hash").get<std::string>());
  std::printf("rewrote %zu scenario results -> %s\n", results.size(),
              out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    const json cfg = load_config_file(argc, argv);

    CLI::App app{"gridwatch: smart-meter load-stream integrity monitoring"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file with defaults")
        ->expected(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic series");
    DataFlags synth_data;
    int synth_days = cfg_or<int>(cfg, "/data/days", 540);
    std::uint64_t synth_seed = cfg_or<std::uint64_t>(cfg, "/data/seed", 1);
    std::string synth_out = "synth.csv";
    synth->add_option("--days", synth_days, "days to generate")
        ->check(CLI::Range(2, 100000));
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--out", synth_out, "output CSV path")->required();
    synth->add_option("--base-kw", synth_data.profile.base_kw, "base load");
    synth->add_option("--daily-amp", synth_data.profile.daily_amplitude,
                      "daily amplitude fraction");
    synth->add_option("--weekly-amp", synth_data.profile.weekly_amplitude,
                      "weekday/weekend modulation fraction");
    synth->add_option("--noise", synth_data.profile.noise_sigma,
                      "noise sigma as a fraction of base");

    // train
    auto* train = app.add_subcommand("train", "train a forecaster");
    DataFlags train_data;
    add_data_flags(train, train_data, cfg);
    TrainFlags train_flags;
    train_flags.model = cfg_or<std::string>(cfg, "/forecaster/model", "etr");
    train_flags.lookback = cfg_or<std::size_t>(cfg, "/lookback", 14);
    train_flags.train_fraction =
        cfg_or<double>(cfg, "/split/train_fraction", 0.8);
    train_flags.seed = cfg_or<std::uint64_t>(cfg, "/seed", 1);
    train_flags.etr.tree_count =
        cfg_or<std::size_t>(cfg, "/forecaster/trees", 100);
    train_flags.etr.split_features =
        cfg_or<std::size_t>(cfg, "/forecaster/split_features", 5);
    train_flags.etr.min_split =
        cfg_or<std::size_t>(cfg, "/forecaster/min_split", 2);
    train_flags.recurrent.epochs =
        cfg_or<std::size_t>(cfg, "/forecaster/epochs", 150);
    train_flags.recurrent.hidden =
        cfg_or<std::size_t>(cfg, "/forecaster/hidden", 128);
    train_flags.recurrent.layers =
        cfg_or<std::size_t>(cfg, "/forecaster/layers", 2);
    train_flags.recurrent.dropout =
        cfg_or<double>(cfg, "/forecaster/dropout", 0.3);
    train_flags.recurrent.learning_rate =
        cfg_or<double>(cfg, "/forecaster/learning_rate", 1e-3);
    train_flags.recurrent.batch_size =
        cfg_or<std::size_t>(cfg, "/forecaster/batch_size", 32);
    train->add_option("--model", train_flags.model, "etr | lstm | bilstm")
        ->check(CLI::IsMember({"etr", "lstm", "bilstm"}));
    train->add_option("--out", train_flags.out, "artifact output path");
    train->add_option("--report", train_flags.report_path,
                      "write a JSON training report");
    train->add_option("--lookback", train_flags.lookback, "input window hours");
    train->add_option("--split", train_flags.train_fraction,
                      "training fraction of the series");
    train->add_option("--seed", train_flags.seed, "training seed");
    train->add_option("--trees", train_flags.etr.tree_count, "ETR tree count");
    train->add_option("--split-features", train_flags.etr.split_features,
                      "ETR features sampled per split");
    train->add_option("--min-split", train_flags.etr.min_split,
                      "ETR minimum samples to split");
    train->add_option("--epochs", train_flags.recurrent.epochs,
                      "recurrent training epochs");
    train->add_option("--hidden", train_flags.recurrent.hidden,
                      "recurrent cells per layer");
    train->add_option("--layers", train_flags.recurrent.layers,
                      "recurrent layers");
    train->add_option("--dropout", train_flags.recurrent.dropout,
                      "dropout rate between recurrent layers");
    train->add_option("--learning-rate", train_flags.recurrent.learning_rate,
                      "Adam learning rate");
    train->add_option("--batch-size", train_flags.recurrent.batch_size,
                      "minibatch size");

    // forecast
    auto* fc = app.add_subcommand("forecast", "one-step-ahead predictions");
    DataFlags fc_data;
    add_data_flags(fc, fc_data, cfg);
    std::string fc_artifact, fc_out = "predictions.csv";
    fc->add_option("--artifact", fc_artifact, "model artifact")->required();
    fc->add_option("--out", fc_out, "output CSV path");

    // attack
    auto* atk = app.add_subcommand("attack", "inject a scenario attack");
    DataFlags atk_data;
    add_data_flags(atk, atk_data, cfg);
    int atk_scenario = 1;
    std::uint64_t atk_seed = 1, atk_noise_seed = 2;
    double atk_noise = 0.0;
    std::string atk_out = "attacked.csv";
    atk->add_option("--scenario", atk_scenario, "scenario id 1..30")
        ->check(CLI::Range(1, 30));
    atk->add_option("--seed", atk_seed, "attack mask seed");
    atk->add_option("--noise-sigma", atk_noise,
                    "measurement noise on non-attacked points");
    atk->add_option("--noise-seed", atk_noise_seed, "noise seed");
    atk->add_option("--out", atk_out, "labeled CSV output");

    // detect
    auto* det = app.add_subcommand("detect", "run the online detector");
    DetectFlags det_flags;
    det_flags.seed = cfg_or<std::uint64_t>(cfg, "/seed", 1);
    EnvelopeFlags det_env;
    add_envelope_flags(det, det_env, cfg);
    det->add_option("--artifact", det_flags.artifact_path, "model artifact");
    det->add_option("--oracle-sigma", det_flags.oracle_sigma,
                    "use the oracle forecaster with this sigma");
    det->add_option("--oracle-seed", det_flags.oracle_seed, "oracle seed");
    det->add_option("--history", det_flags.history_path,
                    "clean history CSV (warm-up source)")
        ->required();
    det->add_option("--stream", det_flags.stream_path,
                    "stream CSV (plain or labeled)")
        ->required();
    det->add_option("--clean", det_flags.clean_path,
                    "clean continuation CSV for the oracle");
    det->add_option("--out", det_flags.out_dir, "output directory");
    det->add_option("--seed", det_flags.seed, "detector seed");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "run the scenario suite");
    DataFlags ev_data;
    add_data_flags(ev, ev_data, cfg);
    if (ev_data.synth_days == 0) ev_data.synth_days = 540;
    EvaluateFlags ev_flags;
    ev_flags.seed = cfg_or<std::uint64_t>(cfg, "/seed", 1);
    ev_flags.repetitions = cfg_or<int>(cfg, "/suite/repetitions", 3);
    ev_flags.stream_len = cfg_or<std::size_t>(cfg, "/suite/stream_length", 2000);
    ev_flags.warmup = cfg_or<std::size_t>(cfg, "/suite/warmup", 168);
    ev_flags.noise_sigma = cfg_or<double>(cfg, "/suite/noise_sigma", 0.02);
    ev_flags.oracle_sigma = cfg_or<double>(cfg, "/suite/oracle_sigma", 0.02);
    ev_flags.scenarios = cfg_or<std::string>(cfg, "/suite/scenarios", "all");
    ev_flags.train_fraction = cfg_or<double>(cfg, "/split/train_fraction", 0.8);
    EnvelopeFlags ev_env;
    add_envelope_flags(ev, ev_env, cfg);
    ev->add_option("--detector", ev_flags.detectors,
                   "ee-oracle | ee-etr:artifact | ee-lstm:artifact | "
                   "ee-bilstm:artifact (repeatable)");
    ev->add_option("--oracle-sigma", ev_flags.oracle_sigma,
                   "oracle forecaster sigma");
    ev->add_option("--scenarios", ev_flags.scenarios,
                   "'all' or comma-separated ids");
    ev->add_option("--reps", ev_flags.repetitions, "repetitions per scenario");
    ev->add_option("--stream-len", ev_flags.stream_len, "test stream length");
    ev->add_option("--noise-sigma", ev_flags.noise_sigma,
                   "measurement noise sigma");
    ev->add_option("--split", ev_flags.train_fraction, "training fraction");
    ev->add_option("--seed", ev_flags.seed, "master seed");
    ev->add_option("--jobs", ev_flags.jobs, "parallel suite workers")
        ->check(CLI::Range(1, 256));
    ev->add_option("--out", ev_flags.out_dir, "report directory")->required();

    // report
    auto* rep = app.add_subcommand("report", "re-emit tables from a suite JSON");
    std::string rep_json, rep_out = "report-out";
    rep->add_option("--suite-json", rep_json, "suite_results.json path")
        ->required();
    rep->add_option("--out", rep_out, "output directory");

    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);  // --help / help subcommand exit 0
    } catch (const CLI::ParseError& e) {
      app.exit(e);
      return kExitUsage;
    }

    if (synth->parsed()) {
      return cmd_synth(synth_data, synth_days, synth_seed, synth_out);
    }
    if (train->parsed()) return cmd_train(train_data, train_flags);
    if (fc->parsed()) return cmd_forecast(fc_data, fc_artifact, fc_out);
    if (atk->parsed()) {
      return cmd_attack(atk_data, atk_scenario, atk_seed, atk_noise,
                        atk_noise_seed, atk_out);
    }
    if (det->parsed()) return cmd_detect(det_flags, det_env);
    if (ev->parsed()) return cmd_evaluate(ev_data, ev_flags, ev_env);
    if (rep->parsed()) return cmd_report(rep_json, rep_out);
    return kExitUsage;
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  } catch (const gridwatch::data::ParseError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
