#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fpsam/dataset.hpp"
#include "fpsam/fp_miner.hpp"

namespace fpsam {

struct EvalConfig {
  std::vector<double> iou_thresholds;  // per class; see default_iou_thresholds
  double score_threshold = 0.1;        // floor for the FP-count instrumentation
  size_t histogram_bins = 10;          // score sweep resolution
  size_t workers = 1;
};

// 0.7 for vehicle-sized classes (car/vehicle/van/truck), 0.5 otherwise.
std::vector<double> default_iou_thresholds(const ClassSet& classes);

// Greedy score-ordered matching. Ties break by (score desc, center lex).
struct MatchResult {
  std::vector<int> pred_to_gt;  // per prediction, matched gt index or -1
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;
};

MatchResult match_predictions(std::span<const Prediction> preds,
                              std::span<const Box3D> gts, double iou_threshold);

// AP over 40 equally spaced recall positions {1/40, ..., 1}: at each, the
// max precision over operating points (distinct score cutoffs) reaching that
// recall, 0 when unreachable. nullopt when there is no ground truth.
std::optional<double> average_precision_r40(std::span<const Prediction> preds,
                                            std::span<const Box3D> gts,
                                            double iou_threshold);

struct ClassEval {
  std::optional<double> ap;
  std::vector<double> precision;  // per operating point
  std::vector<double> recall;
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;
  size_t gt_count = 0;
};

struct EvalResult {
  std::vector<ClassEval> per_class;
  size_t total_false_positives = 0;  // unmatched predictions over all classes
  // assignments[scene][class][pred] = matched gt index or -1, with
  // predictions in per-scene, per-class detection order.
  std::vector<std::vector<std::vector<int>>> assignments;

  std::optional<double> mean_ap() const;
};

// Dataset-level evaluation from per-scene predictions (scores pooled across
// scenes, matching confined to each prediction's own scene).
EvalResult evaluate_predictions(const Dataset& dataset,
                                std::span<const std::vector<Prediction>> per_scene_preds,
                                const EvalConfig& config);

// Runs the detector over every scene, then evaluates.
EvalResult evaluate_detector(const Detector& detector, const Dataset& dataset,
                             const EvalConfig& config);

// Per-class totals of predictions with score >= threshold whose IoU with
// every scene label is zero (the miner's rule, shared implementation).
std::vector<size_t> count_false_positives_in(
    const Dataset& dataset, std::span<const std::vector<Prediction>> per_scene_preds,
    double score_threshold);
std::vector<size_t> count_false_positives(const Detector& detector,
                                          const Dataset& dataset,
                                          double score_threshold, size_t workers = 1);

// Histogram over [0, 1] of the scores of all false-positive predictions.
std::vector<size_t> score_histogram_of_fps(const Detector& detector,
                                           const Dataset& dataset, size_t bins,
                                           size_t workers = 1);

void write_eval_csv(const EvalResult& result, const ClassSet& classes,
                    const std::filesystem::path& path);

std::vector<std::vector<Prediction>> detect_all(const Detector& detector,
                                                const Dataset& dataset,
                                                size_t workers);

}  // namespace fpsam
