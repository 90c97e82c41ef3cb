#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fpsam/augmentor.hpp"
#include "fpsam/config.hpp"
#include "fpsam/dataset.hpp"
#include "fpsam/evaluator.hpp"
#include "fpsam/fp_miner.hpp"
#include "fpsam/toy_detector.hpp"

namespace fpsam {

// The four ablation modes.
enum class Mode { kNone, kGtOnly, kFpOnly, kGtAndFp };

const char* to_string(Mode mode);
Mode parse_mode(const std::string& text);

struct HarnessConfig {
  size_t epochs = 10;
  size_t fp_init_epoch = 0;       // 0 = auto: 40% of epochs, at least 1
  size_t fp_update_interval = 0;  // 0 = auto: 10% of epochs, at least 1
  Mode mode = Mode::kGtAndFp;
  uint64_t seed = 0;
  AugmentationPlan plan;
  ToyModelParams detector;        // hyperparameters; weights reset per run
  MinerConfig miner;
  EvalConfig eval;
  size_t gt_min_points = 5;
  size_t workers = 1;
};

// Fills the schedule defaults and checks every invariant; throws
// FormatError before any training happens.
HarnessConfig resolve_config(HarnessConfig config, size_t num_classes);

// Reads the documented key = value surface against a known class set.
HarnessConfig resolve_harness_config(const ConfigMap& cfg, const ClassSet& classes);

struct EpochRecord {
  size_t epoch = 0;
  double mean_loss = 0.0;
  std::vector<size_t> fp_count;               // per class, on the val split
  std::vector<std::optional<double>> ap;      // per class, on the val split
};

struct RunMetrics {
  std::vector<EpochRecord> epochs;
  EvalResult final_eval;
  std::vector<MiningReport> generations;
};

struct RunResult {
  RunMetrics metrics;
  ToyModelParams final_params;
};

// The training loop: augment per mode, one train step per scene, rebuild
// the FP database at fp_init_epoch and every fp_update_interval after
// (epoch start, before augmentation, on the raw training scenes), and
// record val metrics per epoch. Deterministic given (config, seed).
RunResult run_training(const Dataset& train, const Dataset& val,
                       const HarnessConfig& config);

struct ComparisonRun {
  Mode mode = Mode::kNone;
  uint64_t seed = 0;
  RunMetrics metrics;
};

struct ModeSummary {
  Mode mode = Mode::kNone;
  double mean_final_ap = 0.0;
  double std_final_ap = 0.0;
  std::vector<double> mean_fp_per_epoch;  // total over classes
  std::vector<double> std_fp_per_epoch;
};

struct ComparisonResult {
  std::vector<ComparisonRun> runs;
  std::vector<ModeSummary> summaries;  // one per mode, in Mode order
};

// All four modes per seed with otherwise identical configs.
ComparisonResult compare_modes(const Dataset& train, const Dataset& val,
                               const HarnessConfig& base_config,
                               std::span<const uint64_t> seeds, size_t workers = 1);

void write_metrics_csv(const RunMetrics& metrics, const ClassSet& classes,
                       const std::filesystem::path& path);
// Long-form FP-count series (epoch, class, count) for curve plotting.
void write_fp_count_series_csv(const RunMetrics& metrics, const ClassSet& classes,
                               const std::filesystem::path& path);
void write_comparison_csv(const ComparisonResult& result,
                          const std::filesystem::path& path);
void write_fp_series_csv(const ComparisonResult& result,
                         const std::filesystem::path& path);

}  // namespace fpsam
