// fpsampler: synthetic-data generation, GT/FP sample databases, scene
// augmentation, toy-detector training, and detection evaluation from one
// binary. Exit codes: 0 success, 1 usage error, 2 data/format error,
// 3 runtime failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fpsam/augmentor.hpp"
#include "fpsam/config.hpp"
#include "fpsam/dataset.hpp"
#include "fpsam/errors.hpp"
#include "fpsam/evaluator.hpp"
#include "fpsam/fp_miner.hpp"
#include "fpsam/harness.hpp"
#include "fpsam/io_util.hpp"
#include "fpsam/sample_db.hpp"
#include "fpsam/toy_detector.hpp"

namespace fs = std::filesystem;
using namespace fpsam;

namespace {

uint64_t resolve_seed(const std::optional<uint64_t>& flag_seed) {
  if (flag_seed) return *flag_seed;
  if (const char* env = std::getenv("FPSAMPLER_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0') return v;
    throw FormatError(std::string("FPSAMPLER_SEED is not an integer: '") + env + "'");
  }
  return 0;
}

AugmentationPlan load_plan(const fs::path& path, const ClassSet& classes) {
  const ConfigMap cfg = ConfigMap::parse_file(path);
  AugmentationPlan plan;
  auto to_counts = [&](const std::string& key) {
    std::vector<size_t> counts;
    for (double v : cfg.get_double_list(key, classes.size(), 0.0)) {
      if (v < 0.0) throw FormatError(path.string() + ": '" + key + "' must be nonnegative");
      counts.push_back(static_cast<size_t>(v));
    }
    return counts;
  };
  plan.gt_per_class = to_counts("alpha");
  plan.fp_per_class = to_counts("beta");
  plan.max_placement_retries = cfg.get_u64("max_placement_retries", 10);
  plan.carve_out = cfg.get_bool("carve_out", true);
  cfg.finish();
  if (plan.max_placement_retries == 0) {
    throw FormatError(path.string() + ": max_placement_retries must be >= 1");
  }
  return plan;
}

int cmd_gen(const std::string& spec_path, const std::optional<uint64_t>& seed_flag,
            const std::string& out_dir) {
  const SyntheticSpec spec = load_synthetic_spec(spec_path);
  const uint64_t seed = resolve_seed(seed_flag);
  const Dataset ds = generate_synthetic_dataset(spec, seed);
  save_dataset(ds, out_dir);
  size_t labels = 0, points = 0;
  for (const Scene& s : ds.scenes) {
    labels += s.labels.size();
    points += s.cloud.size();
  }
  std::cout << "wrote " << ds.scenes.size() << " scenes (" << labels << " labels, "
            << points << " points) to " << out_dir << "\n";
  return 0;
}

int cmd_build_gt_db(const std::string& data_dir, const std::string& out_dir,
                    size_t min_points) {
  const Dataset ds = load_dataset(data_dir);
  const GtBuildResult built = build_gt_database(ds, min_points);
  save_database(built.db, out_dir);
  std::cout << "gt database: " << built.report.stored << " samples stored, "
            << built.report.skipped_below_min_points << " of "
            << built.report.total_labels << " labels skipped below " << min_points
            << " points\n";
  return 0;
}

int cmd_mine_fp(const std::string& data_dir, const std::string& ckpt_path,
                const std::string& out_dir, double score_threshold, size_t min_points,
                size_t workers) {
  const Dataset ds = load_dataset(data_dir);
  const ToyDetector detector(load_checkpoint(ckpt_path));
  MinerConfig cfg;
  cfg.score_threshold = score_threshold;
  cfg.min_points = min_points;
  cfg.workers = workers;
  const MiningResult mined = update_fp_database(detector, ds, cfg);
  save_database(mined.db, out_dir);
  const std::string report = mined.report.to_text(ds.classes);
  write_file_atomic(fs::path(out_dir) / "mining_report.txt", report);
  std::cout << report;
  return 0;
}

int cmd_augment(const std::string& data_dir, const std::string& scene_id,
                const std::string& gt_db_dir, const std::string& fp_db_dir,
                const std::string& plan_path, const std::optional<uint64_t>& seed_flag,
                const std::string& out_dir) {
  const ClassSet classes = load_class_set(fs::path(data_dir) / "classes.txt");
  Scene scene;
  scene.id = scene_id;
  scene.cloud = load_point_cloud(fs::path(data_dir) / "clouds" / (scene_id + ".bin"));
  scene.labels = load_labels(fs::path(data_dir) / "labels" / (scene_id + ".txt"), classes);

  const SampleDatabase gt_db = load_database(gt_db_dir);
  std::optional<SampleDatabase> fp_db;
  if (!fp_db_dir.empty()) fp_db = load_database(fp_db_dir);
  const AugmentationPlan plan = load_plan(plan_path, classes);

  Rng rng(mix_seed({resolve_seed(seed_flag), hash_string(scene.id)}));
  const AugmentedScene aug =
      augment_scene(scene, gt_db, fp_db ? &*fp_db : nullptr, plan, rng);

  fs::create_directories(out_dir);
  save_point_cloud(aug.cloud, fs::path(out_dir) / (scene_id + ".bin"));
  save_labels(aug.labels, classes, fs::path(out_dir) / (scene_id + ".txt"));
  write_file_atomic(fs::path(out_dir) / (scene_id + ".trace.txt"),
                    aug.trace.to_text(classes));
  std::cout << "augmented scene " << scene_id << ": placed " << aug.trace.placed_gt
            << " gt + " << aug.trace.placed_fp << " fp samples, removed "
            << aug.trace.removed_points << " scene points\n";
  return 0;
}

struct LoadedTrainConfig {
  Dataset train;
  Dataset val;
  HarnessConfig harness;
};

LoadedTrainConfig load_train_config(const std::string& config_path, size_t workers_flag) {
  const ConfigMap cfg = ConfigMap::parse_file(config_path);
  LoadedTrainConfig out;
  out.train = load_dataset(cfg.require_string("train_dir"));
  out.val = load_dataset(cfg.require_string("val_dir"));
  out.harness = resolve_harness_config(cfg, out.train.classes);
  cfg.finish();
  if (workers_flag > 0) out.harness.workers = workers_flag;
  return out;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              size_t workers) {
  LoadedTrainConfig loaded = load_train_config(config_path, workers);
  const RunResult result = run_training(loaded.train, loaded.val, loaded.harness);

  fs::create_directories(out_dir);
  write_metrics_csv(result.metrics, loaded.train.classes,
                    fs::path(out_dir) / "metrics.csv");
  write_fp_count_series_csv(result.metrics, loaded.train.classes,
                            fs::path(out_dir) / "fp_counts.csv");
  save_checkpoint(result.final_params, fs::path(out_dir) / "checkpoint.txt");
  write_eval_csv(result.metrics.final_eval, loaded.train.classes,
                 fs::path(out_dir) / "eval.csv");
  for (const MiningReport& report : result.metrics.generations) {
    write_file_atomic(fs::path(out_dir) / ("mining_report_gen" +
                                           std::to_string(report.generation) + ".txt"),
                      report.to_text(loaded.train.classes));
  }
  std::cout << "trained " << loaded.harness.epochs << " epochs (mode "
            << to_string(loaded.harness.mode) << "), final mAP "
            << (result.metrics.final_eval.mean_ap()
                    ? std::to_string(*result.metrics.final_eval.mean_ap())
                    : std::string("n/a"))
            << "; outputs in " << out_dir << "\n";
  return 0;
}

int cmd_compare(const std::string& config_path, const std::string& seeds_csv,
                const std::string& out_dir, size_t workers) {
  LoadedTrainConfig loaded = load_train_config(config_path, 0);
  std::vector<uint64_t> seeds;
  {
    std::istringstream in(seeds_csv);
    std::string item;
    while (std::getline(in, item, ',')) {
      char* end = nullptr;
      const unsigned long long v = std::strtoull(item.c_str(), &end, 10);
      if (end == item.c_str() || *end != '\0') {
        throw FormatError("--seeds entry '" + item + "' is not an integer");
      }
      seeds.push_back(v);
    }
  }
  const ComparisonResult result =
      compare_modes(loaded.train, loaded.val, loaded.harness, seeds,
                    workers > 0 ? workers : 0);

  fs::create_directories(out_dir);
  write_comparison_csv(result, fs::path(out_dir) / "comparison.csv");
  write_fp_series_csv(result, fs::path(out_dir) / "fp_series.csv");
  for (const ModeSummary& s : result.summaries) {
    std::cout << to_string(s.mode) << ": mean final mAP " << s.mean_final_ap << " (std "
              << s.std_final_ap << ")\n";
  }
  return 0;
}

int cmd_eval(const std::string& data_dir, const std::string& ckpt_path,
             const std::string& out_dir, const std::string& iou_thresholds_csv,
             size_t workers) {
  const Dataset ds = load_dataset(data_dir);
  const ToyDetector detector(load_checkpoint(ckpt_path));
  EvalConfig cfg;
  cfg.workers = workers;
  if (!iou_thresholds_csv.empty()) {
    std::istringstream in(iou_thresholds_csv);
    std::string item;
    while (std::getline(in, item, ',')) {
      char* end = nullptr;
      const double v = std::strtod(item.c_str(), &end);
      if (end == item.c_str() || *end != '\0') {
        throw FormatError("--iou-thresholds entry '" + item + "' is not a number");
      }
      cfg.iou_thresholds.push_back(v);
    }
    if (cfg.iou_thresholds.size() == 1) {
      cfg.iou_thresholds.assign(ds.classes.size(), cfg.iou_thresholds[0]);
    }
  }
  const EvalResult result = evaluate_detector(detector, ds, cfg);
  fs::create_directories(out_dir);
  write_eval_csv(result, ds.classes, fs::path(out_dir) / "eval.csv");
  {
    const auto hist = score_histogram_of_fps(detector, ds, cfg.histogram_bins, workers);
    std::ostringstream out;
    out << "bin_low,bin_high,fp_count\n";
    for (size_t b = 0; b < hist.size(); ++b) {
      out << static_cast<double>(b) / hist.size() << ","
          << static_cast<double>(b + 1) / hist.size() << "," << hist[b] << "\n";
    }
    write_file_atomic(fs::path(out_dir) / "fp_score_histogram.csv", out.str());
  }
  for (size_t c = 0; c < result.per_class.size(); ++c) {
    const ClassEval& ce = result.per_class[c];
    std::cout << ds.classes.name(static_cast<int>(c)) << ": ap="
              << (ce.ap ? std::to_string(*ce.ap) : std::string("n/a")) << " tp=" << ce.tp
              << " fp=" << ce.fp << " fn=" << ce.fn << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"False-positive sampling toolkit for LiDAR 3D detection"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  size_t workers = 0;  // 0 = machine parallelism
  app.add_option("--workers", workers, "Worker threads (default: machine parallelism)");

  std::string spec_path, data_dir, out_dir, ckpt_path, gt_db_dir, fp_db_dir;
  std::string plan_path, config_path, scene_id, seeds_csv, iou_thresholds_csv;
  std::optional<uint64_t> seed_flag;
  size_t min_points = 5;
  double score_threshold = 0.1;

  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->add_option("--spec", spec_path, "Synthetic spec file")->required();
  gen->add_option("--seed", seed_flag, "Seed (fallback: FPSAMPLER_SEED, then 0)");
  gen->add_option("--out", out_dir, "Output dataset directory")->required();

  CLI::App* build = app.add_subcommand("build-gt-db", "Build the GT sample database");
  build->add_option("--data", data_dir, "Dataset directory")->required();
  build->add_option("--out", out_dir, "Output database directory")->required();
  build->add_option("--min-points", min_points, "Minimum points per sample");

  CLI::App* mine = app.add_subcommand("mine-fp", "One FP-database update pass");
  mine->add_option("--data", data_dir, "Dataset directory")->required();
  mine->add_option("--ckpt", ckpt_path, "Detector checkpoint")->required();
  mine->add_option("--out", out_dir, "Output database directory")->required();
  mine->add_option("--score-threshold", score_threshold, "Prediction score floor");
  mine->add_option("--min-points", min_points, "Minimum points per sample");

  CLI::App* aug = app.add_subcommand("augment", "Augment one scene");
  aug->add_option("--data", data_dir, "Dataset directory")->required();
  aug->add_option("--scene", scene_id, "Scene id")->required();
  aug->add_option("--gt-db", gt_db_dir, "GT database directory")->required();
  aug->add_option("--fp-db", fp_db_dir, "FP database directory (optional)");
  aug->add_option("--plan", plan_path, "Augmentation plan file")->required();
  aug->add_option("--seed", seed_flag, "Seed (fallback: FPSAMPLER_SEED, then 0)");
  aug->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* train = app.add_subcommand("train", "Run the training harness");
  train->add_option("--config", config_path, "Harness config file")->required();
  train->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* compare = app.add_subcommand("compare", "Run all four modes per seed");
  compare->add_option("--config", config_path, "Harness config file")->required();
  compare->add_option("--seeds", seeds_csv, "Comma-separated seeds")->required();
  compare->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval->add_option("--data", data_dir, "Dataset directory")->required();
  eval->add_option("--ckpt", ckpt_path, "Detector checkpoint")->required();
  eval->add_option("--out", out_dir, "Output directory")->required();
  eval->add_option("--iou-thresholds", iou_thresholds_csv,
                   "Per-class IoU thresholds (csv or one value for all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen(spec_path, seed_flag, out_dir);
    if (build->parsed()) return cmd_build_gt_db(data_dir, out_dir, min_points);
    if (mine->parsed()) {
      return cmd_mine_fp(data_dir, ckpt_path, out_dir, score_threshold, min_points,
                         workers);
    }
    if (aug->parsed()) {
      return cmd_augment(data_dir, scene_id, gt_db_dir, fp_db_dir, plan_path, seed_flag,
                         out_dir);
    }
    if (train->parsed()) return cmd_train(config_path, out_dir, workers);
    if (compare->parsed()) return cmd_compare(config_path, seeds_csv, out_dir, workers);
    if (eval->parsed()) {
      return cmd_eval(data_dir, ckpt_path, out_dir, iou_thresholds_csv, workers);
    }
    std::cerr << "no subcommand\n";
    return 1;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
