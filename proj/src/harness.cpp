#include "fpsam/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "fpsam/errors.hpp"
#include "fpsam/io_util.hpp"
#include "fpsam/parallel.hpp"

namespace fpsam {

namespace {

// Stream tags for deriving independent rng streams from the run seed.
constexpr uint64_t kStreamOrder = 0x6f72646572ULL;
constexpr uint64_t kStreamAugment = 0x6175676dULL;

bool uses_gt(Mode mode) { return mode == Mode::kGtOnly || mode == Mode::kGtAndFp; }
bool uses_fp(Mode mode) { return mode == Mode::kFpOnly || mode == Mode::kGtAndFp; }

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::kNone: return "none";
    case Mode::kGtOnly: return "gt_only";
    case Mode::kFpOnly: return "fp_only";
    case Mode::kGtAndFp: return "gt_and_fp";
  }
  return "?";
}

Mode parse_mode(const std::string& text) {
  if (text == "none") return Mode::kNone;
  if (text == "gt_only") return Mode::kGtOnly;
  if (text == "fp_only") return Mode::kFpOnly;
  if (text == "gt_and_fp") return Mode::kGtAndFp;
  throw FormatError("unknown mode '" + text +
                    "' (expected none, gt_only, fp_only, gt_and_fp)");
}

HarnessConfig resolve_config(HarnessConfig config, size_t num_classes) {
  if (config.epochs == 0) throw FormatError("epochs must be > 0");
  if (config.fp_init_epoch == 0) {
    config.fp_init_epoch = std::max<size_t>(1, (config.epochs * 2) / 5);
  }
  if (config.fp_update_interval == 0) {
    config.fp_update_interval = std::max<size_t>(1, config.epochs / 10);
  }
  if (config.fp_init_epoch > config.epochs) {
    throw FormatError("fp_init_epoch " + std::to_string(config.fp_init_epoch) +
                      " exceeds epochs " + std::to_string(config.epochs));
  }
  if (config.plan.max_placement_retries == 0) {
    throw FormatError("max_placement_retries must be >= 1");
  }
  if (config.plan.gt_per_class.size() != num_classes ||
      config.plan.fp_per_class.size() != num_classes) {
    throw FormatError("augmentation plan must give alpha/beta for all " +
                      std::to_string(num_classes) + " classes");
  }
  if (!config.eval.iou_thresholds.empty() &&
      config.eval.iou_thresholds.size() != num_classes) {
    throw FormatError("iou_thresholds must give one value per class");
  }
  for (double t : config.eval.iou_thresholds) {
    if (!(t > 0.0 && t <= 1.0)) throw FormatError("iou thresholds must lie in (0, 1]");
  }
  return config;
}

HarnessConfig resolve_harness_config(const ConfigMap& cfg, const ClassSet& classes) {
  HarnessConfig hc;
  const size_t n = classes.size();
  hc.epochs = cfg.get_u64("epochs", hc.epochs);
  hc.fp_init_epoch = cfg.get_u64("fp_init_epoch", 0);
  hc.fp_update_interval = cfg.get_u64("fp_update_interval", 0);
  hc.mode = parse_mode(cfg.get_string("mode", "gt_and_fp"));
  hc.seed = cfg.get_u64("seed", 0);

  auto to_counts = [&](const std::string& key, double fallback) {
    std::vector<size_t> counts;
    for (double v : cfg.get_double_list(key, n, fallback)) {
      if (v < 0.0) throw FormatError("key '" + key + "' must be nonnegative");
      counts.push_back(static_cast<size_t>(v));
    }
    return counts;
  };
  hc.plan.gt_per_class = to_counts("alpha", 2.0);
  hc.plan.fp_per_class = to_counts("beta", 2.0);
  hc.plan.max_placement_retries = cfg.get_u64("max_placement_retries", 10);
  hc.plan.carve_out = cfg.get_bool("carve_out", true);

  hc.detector = init_toy_params(n);
  hc.detector.grid_cell = cfg.get_double("grid_cell", hc.detector.grid_cell);
  hc.detector.learning_rate = cfg.get_double("learning_rate", hc.detector.learning_rate);
  hc.detector.emit_threshold = cfg.get_double("emit_threshold", hc.detector.emit_threshold);
  hc.detector.match_threshold = cfg.get_double("match_threshold", hc.detector.match_threshold);
  hc.detector.positive_weight = cfg.get_double("positive_weight", hc.detector.positive_weight);

  hc.miner.score_threshold = cfg.get_double("score_threshold", hc.miner.score_threshold);
  hc.miner.min_points = cfg.get_u64("min_points", hc.miner.min_points);
  hc.gt_min_points = hc.miner.min_points;

  if (cfg.has("iou_thresholds")) {
    hc.eval.iou_thresholds = cfg.get_double_list("iou_thresholds", n, 0.5);
  } else {
    hc.eval.iou_thresholds = default_iou_thresholds(classes);
  }
  hc.eval.score_threshold = cfg.get_double("eval_score_threshold", hc.eval.score_threshold);
  hc.workers = cfg.get_u64("workers", hc.workers);
  return resolve_config(std::move(hc), n);
}

RunResult run_training(const Dataset& train, const Dataset& val,
                       const HarnessConfig& raw_config) {
  const size_t num_classes = train.classes.size();
  if (val.classes != train.classes) {
    throw FormatError("train and val datasets use different class sets");
  }
  {
    std::set<std::string> train_ids;
    for (const Scene& s : train.scenes) train_ids.insert(s.id);
    for (const Scene& s : val.scenes) {
      if (train_ids.count(s.id)) {
        throw FormatError("scene id '" + s.id + "' appears in both train and val");
      }
    }
  }
  const HarnessConfig config = resolve_config(raw_config, num_classes);

  SampleDatabase gt_db(num_classes, 0, "gt", 0);
  if (uses_gt(config.mode)) {
    gt_db = build_gt_database(train, config.gt_min_points).db;
  }

  ToyModelParams params = config.detector;
  params.per_class.assign(num_classes, ClassWeights{});

  std::optional<SampleDatabase> fp_db;
  uint32_t fp_generation = 0;

  RunResult result;
  for (size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    // Database rebuild happens at epoch start so the mined samples reflect
    // the detector as of the end of the previous epoch; mining always reads
    // the raw training scenes.
    if (uses_fp(config.mode) && epoch >= config.fp_init_epoch &&
        (epoch - config.fp_init_epoch) % config.fp_update_interval == 0) {
      MinerConfig miner = config.miner;
      miner.workers = config.workers;
      miner.built_epoch = static_cast<uint32_t>(epoch);
      MiningResult mined =
          update_fp_database(ToyDetector(params), train, miner, fp_generation);
      fp_generation = mined.db.generation();
      fp_db = std::move(mined.db);
      result.metrics.generations.push_back(std::move(mined.report));
    }

    std::vector<size_t> order(train.scenes.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    {
      Rng shuffle_rng(mix_seed({config.seed, kStreamOrder, epoch}));
      for (size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);
      }
    }

    AugmentationPlan plan = config.plan;
    if (!uses_gt(config.mode)) plan.gt_per_class.assign(num_classes, 0);
    if (!uses_fp(config.mode)) plan.fp_per_class.assign(num_classes, 0);

    double loss_sum = 0.0;
    for (size_t si : order) {
      const Scene& scene = train.scenes[si];
      double loss = 0.0;
      if (config.mode == Mode::kNone) {
        TrainStepResult step = train_step(params, scene.cloud, scene.labels);
        params = std::move(step.params);
        loss = step.loss;
      } else {
        Rng aug_rng(mix_seed({config.seed, kStreamAugment, epoch, hash_string(scene.id)}));
        const AugmentedScene aug = augment_scene(
            scene, gt_db, fp_db ? &*fp_db : nullptr, plan, aug_rng);
        TrainStepResult step = train_step(params, aug.cloud, aug.labels);
        params = std::move(step.params);
        loss = step.loss;
      }
      loss_sum += loss;
    }

    // Val instrumentation: one detect pass feeds both the FP counter and AP.
    const auto val_preds = detect_all(ToyDetector(params), val, config.workers);
    EvalConfig eval = config.eval;
    eval.workers = config.workers;
    EvalResult eval_result = evaluate_predictions(val, val_preds, eval);

    EpochRecord record;
    record.epoch = epoch;
    record.mean_loss =
        train.scenes.empty() ? 0.0 : loss_sum / static_cast<double>(train.scenes.size());
    record.fp_count = count_false_positives_in(val, val_preds, eval.score_threshold);
    for (const ClassEval& ce : eval_result.per_class) record.ap.push_back(ce.ap);
    result.metrics.epochs.push_back(std::move(record));
    result.metrics.final_eval = std::move(eval_result);
  }

  result.final_params = std::move(params);
  return result;
}

ComparisonResult compare_modes(const Dataset& train, const Dataset& val,
                               const HarnessConfig& base_config,
                               std::span<const uint64_t> seeds, size_t workers) {
  if (seeds.empty()) throw FormatError("compare_modes needs at least one seed");
  const Mode modes[4] = {Mode::kNone, Mode::kGtOnly, Mode::kFpOnly, Mode::kGtAndFp};

  struct Job {
    Mode mode;
    uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Mode mode : modes) {
    for (uint64_t seed : seeds) jobs.push_back(Job{mode, seed});
  }

  // Runs are independent; parallelize across them and keep each run
  // single-threaded so the schedule is deterministic either way.
  auto runs = parallel_map(jobs.size(), workers, [&](size_t j) {
    HarnessConfig cfg = base_config;
    cfg.mode = jobs[j].mode;
    cfg.seed = jobs[j].seed;
    cfg.workers = 1;
    ComparisonRun run;
    run.mode = jobs[j].mode;
    run.seed = jobs[j].seed;
    run.metrics = run_training(train, val, cfg).metrics;
    return run;
  });

  ComparisonResult result;
  result.runs = std::move(runs);

  for (Mode mode : modes) {
    ModeSummary summary;
    summary.mode = mode;
    std::vector<double> final_aps;
    std::vector<std::vector<double>> fp_series;
    for (const ComparisonRun& run : result.runs) {
      if (run.mode != mode) continue;
      final_aps.push_back(run.metrics.final_eval.mean_ap().value_or(0.0));
      std::vector<double> series;
      for (const EpochRecord& er : run.metrics.epochs) {
        size_t total = 0;
        for (size_t c : er.fp_count) total += c;
        series.push_back(static_cast<double>(total));
      }
      fp_series.push_back(std::move(series));
    }
    const double n = static_cast<double>(final_aps.size());
    double mean = 0.0;
    for (double v : final_aps) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : final_aps) var += (v - mean) * (v - mean);
    summary.mean_final_ap = mean;
    summary.std_final_ap = std::sqrt(var / n);

    const size_t epochs = fp_series.empty() ? 0 : fp_series[0].size();
    summary.mean_fp_per_epoch.assign(epochs, 0.0);
    summary.std_fp_per_epoch.assign(epochs, 0.0);
    for (size_t e = 0; e < epochs; ++e) {
      double m = 0.0;
      for (const auto& s : fp_series) m += s[e];
      m /= n;
      double v = 0.0;
      for (const auto& s : fp_series) v += (s[e] - m) * (s[e] - m);
      summary.mean_fp_per_epoch[e] = m;
      summary.std_fp_per_epoch[e] = std::sqrt(v / n);
    }
    result.summaries.push_back(std::move(summary));
  }
  return result;
}

void write_metrics_csv(const RunMetrics& metrics, const ClassSet& classes,
                       const std::filesystem::path& path) {
  std::ostringstream out;
  out << "epoch,loss";
  for (const auto& name : classes.names()) out << ",fp_" << name;
  for (const auto& name : classes.names()) out << ",ap_" << name;
  out << "\n";
  for (const EpochRecord& er : metrics.epochs) {
    out << er.epoch << "," << format_double(er.mean_loss);
    for (size_t c : er.fp_count) out << "," << c;
    for (const auto& ap : er.ap) out << "," << (ap ? format_double(*ap) : "nan");
    out << "\n";
  }
  write_file_atomic(path, out.str());
}

void write_fp_count_series_csv(const RunMetrics& metrics, const ClassSet& classes,
                               const std::filesystem::path& path) {
  std::ostringstream out;
  out << "epoch,class,count\n";
  for (const EpochRecord& er : metrics.epochs) {
    for (size_t c = 0; c < er.fp_count.size(); ++c) {
      out << er.epoch << "," << classes.name(static_cast<int>(c)) << ","
          << er.fp_count[c] << "\n";
    }
  }
  write_file_atomic(path, out.str());
}

void write_comparison_csv(const ComparisonResult& result,
                          const std::filesystem::path& path) {
  std::ostringstream out;
  out << "mode,runs,mean_final_map,std_final_map,mean_final_fp,std_final_fp\n";
  for (const ModeSummary& s : result.summaries) {
    size_t runs = 0;
    for (const ComparisonRun& r : result.runs) {
      if (r.mode == s.mode) ++runs;
    }
    const double mean_fp =
        s.mean_fp_per_epoch.empty() ? 0.0 : s.mean_fp_per_epoch.back();
    const double std_fp = s.std_fp_per_epoch.empty() ? 0.0 : s.std_fp_per_epoch.back();
    out << to_string(s.mode) << "," << runs << "," << format_double(s.mean_final_ap)
        << "," << format_double(s.std_final_ap) << "," << format_double(mean_fp) << ","
        << format_double(std_fp) << "\n";
  }
  write_file_atomic(path, out.str());
}

void write_fp_series_csv(const ComparisonResult& result,
                         const std::filesystem::path& path) {
  std::ostringstream out;
  out << "mode,epoch,mean_fp,std_fp\n";
  for (const ModeSummary& s : result.summaries) {
    for (size_t e = 0; e < s.mean_fp_per_epoch.size(); ++e) {
      out << to_string(s.mode) << "," << (e + 1) << ","
          << format_double(s.mean_fp_per_epoch[e]) << ","
          << format_double(s.std_fp_per_epoch[e]) << "\n";
    }
  }
  write_file_atomic(path, out.str());
}

}  // namespace fpsam
