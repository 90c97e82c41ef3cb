#include "fpsam/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fpsam/errors.hpp"
#include "fpsam/io_util.hpp"
#include "fpsam/parallel.hpp"

namespace fpsam {

namespace {

constexpr size_t kRecallPositions = 40;

// Canonical evaluation order: score desc, then box center lexicographic,
// then stable source position.
struct PooledPred {
  double score = 0.0;
  Box3D box;
  size_t scene = 0;
  size_t pred_index = 0;  // per-scene per-class detection order
};

bool canonical_less(const PooledPred& a, const PooledPred& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.box.center[0] != b.box.center[0]) return a.box.center[0] < b.box.center[0];
  if (a.box.center[1] != b.box.center[1]) return a.box.center[1] < b.box.center[1];
  if (a.box.center[2] != b.box.center[2]) return a.box.center[2] < b.box.center[2];
  if (a.scene != b.scene) return a.scene < b.scene;
  return a.pred_index < b.pred_index;
}

// AP-R40 from match outcomes in canonical order. Operating points sit at
// distinct score cutoffs, so tied scores enter together.
double ap_r40(const std::vector<PooledPred>& ordered, const std::vector<char>& is_tp,
              size_t gt_count) {
  std::vector<double> precision;
  std::vector<double> recall;
  size_t tp = 0;
  for (size_t i = 0; i < ordered.size(); ++i) {
    tp += is_tp[i] ? 1 : 0;
    const bool cutoff = (i + 1 == ordered.size()) || ordered[i + 1].score != ordered[i].score;
    if (cutoff) {
      precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
      recall.push_back(static_cast<double>(tp) / static_cast<double>(gt_count));
    }
  }

  double ap = 0.0;
  for (size_t j = 1; j <= kRecallPositions; ++j) {
    const double target = static_cast<double>(j) / kRecallPositions;
    double best = 0.0;
    for (size_t i = 0; i < precision.size(); ++i) {
      if (recall[i] >= target) best = std::max(best, precision[i]);
    }
    ap += best;
  }
  return ap / kRecallPositions;
}

}  // namespace

std::vector<double> default_iou_thresholds(const ClassSet& classes) {
  std::vector<double> thr(classes.size(), 0.5);
  for (size_t c = 0; c < classes.size(); ++c) {
    const std::string& n = classes.names()[c];
    if (n == "car" || n == "vehicle" || n == "van" || n == "truck") thr[c] = 0.7;
  }
  return thr;
}

MatchResult match_predictions(std::span<const Prediction> preds,
                              std::span<const Box3D> gts, double iou_threshold) {
  std::vector<PooledPred> pooled(preds.size());
  for (size_t i = 0; i < preds.size(); ++i) {
    pooled[i] = PooledPred{preds[i].score, preds[i].box, 0, i};
  }
  std::sort(pooled.begin(), pooled.end(), canonical_less);

  MatchResult result;
  result.pred_to_gt.assign(preds.size(), -1);
  std::vector<char> claimed(gts.size(), 0);
  for (const PooledPred& p : pooled) {
    int best_gt = -1;
    double best_iou = 0.0;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (claimed[g]) continue;
      const double iou = iou_3d(p.box, gts[g]);
      if (iou >= iou_threshold && iou > best_iou) {
        best_iou = iou;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0) {
      claimed[static_cast<size_t>(best_gt)] = 1;
      result.pred_to_gt[p.pred_index] = best_gt;
      ++result.tp;
    }
  }
  result.fp = preds.size() - result.tp;
  result.fn = gts.size() - result.tp;
  return result;
}

std::optional<double> average_precision_r40(std::span<const Prediction> preds,
                                            std::span<const Box3D> gts,
                                            double iou_threshold) {
  if (gts.empty()) return std::nullopt;
  const MatchResult match = match_predictions(preds, gts, iou_threshold);

  std::vector<PooledPred> pooled(preds.size());
  for (size_t i = 0; i < preds.size(); ++i) {
    pooled[i] = PooledPred{preds[i].score, preds[i].box, 0, i};
  }
  std::sort(pooled.begin(), pooled.end(), canonical_less);
  std::vector<char> is_tp(preds.size(), 0);
  for (size_t i = 0; i < pooled.size(); ++i) {
    is_tp[i] = match.pred_to_gt[pooled[i].pred_index] >= 0;
  }
  return ap_r40(pooled, is_tp, gts.size());
}

EvalResult evaluate_predictions(const Dataset& dataset,
                                std::span<const std::vector<Prediction>> per_scene_preds,
                                const EvalConfig& config) {
  const size_t num_classes = dataset.classes.size();
  const size_t num_scenes = dataset.scenes.size();
  if (per_scene_preds.size() != num_scenes) {
    throw std::invalid_argument("prediction list count does not match scene count");
  }
  std::vector<double> thresholds = config.iou_thresholds.empty()
                                       ? default_iou_thresholds(dataset.classes)
                                       : config.iou_thresholds;
  if (thresholds.size() != num_classes) {
    throw std::invalid_argument("iou_thresholds size does not match class count");
  }

  EvalResult result;
  result.per_class.resize(num_classes);
  result.assignments.assign(num_scenes, {});
  for (size_t s = 0; s < num_scenes; ++s) {
    result.assignments[s].assign(num_classes, {});
  }

  for (size_t c = 0; c < num_classes; ++c) {
    const int class_id = static_cast<int>(c);
    const double iou_threshold = thresholds[c];

    // Pool this class's predictions across scenes; matching stays per-scene.
    std::vector<PooledPred> pooled;
    std::vector<std::vector<const Box3D*>> scene_gts(num_scenes);
    size_t gt_count = 0;
    for (size_t s = 0; s < num_scenes; ++s) {
      size_t class_pred_index = 0;
      for (const Prediction& pred : per_scene_preds[s]) {
        if (pred.class_id != class_id) continue;
        pooled.push_back(PooledPred{pred.score, pred.box, s, class_pred_index++});
      }
      result.assignments[s][c].assign(class_pred_index, -1);
      for (const ObjectLabel& l : dataset.scenes[s].labels) {
        if (l.class_id == class_id) {
          scene_gts[s].push_back(&l.box);
          ++gt_count;
        }
      }
    }
    std::sort(pooled.begin(), pooled.end(), canonical_less);

    std::vector<std::vector<char>> claimed(num_scenes);
    for (size_t s = 0; s < num_scenes; ++s) claimed[s].assign(scene_gts[s].size(), 0);

    std::vector<char> is_tp(pooled.size(), 0);
    size_t tp = 0;
    for (size_t i = 0; i < pooled.size(); ++i) {
      const PooledPred& p = pooled[i];
      const auto& gts = scene_gts[p.scene];
      int best_gt = -1;
      double best_iou = 0.0;
      for (size_t g = 0; g < gts.size(); ++g) {
        if (claimed[p.scene][g]) continue;
        const double iou = iou_3d(p.box, *gts[g]);
        if (iou >= iou_threshold && iou > best_iou) {
          best_iou = iou;
          best_gt = static_cast<int>(g);
        }
      }
      if (best_gt >= 0) {
        claimed[p.scene][static_cast<size_t>(best_gt)] = 1;
        result.assignments[p.scene][c][p.pred_index] = best_gt;
        is_tp[i] = 1;
        ++tp;
      }
    }

    ClassEval& ce = result.per_class[c];
    ce.gt_count = gt_count;
    ce.tp = tp;
    ce.fp = pooled.size() - tp;
    ce.fn = gt_count - tp;
    result.total_false_positives += ce.fp;

    if (gt_count == 0) {
      ce.ap = std::nullopt;
      continue;
    }
    size_t cum_tp = 0;
    for (size_t i = 0; i < pooled.size(); ++i) {
      cum_tp += is_tp[i] ? 1 : 0;
      const bool cutoff = (i + 1 == pooled.size()) || pooled[i + 1].score != pooled[i].score;
      if (cutoff) {
        ce.precision.push_back(static_cast<double>(cum_tp) / static_cast<double>(i + 1));
        ce.recall.push_back(static_cast<double>(cum_tp) / static_cast<double>(gt_count));
      }
    }
    ce.ap = ap_r40(pooled, is_tp, gt_count);
  }
  return result;
}

EvalResult evaluate_detector(const Detector& detector, const Dataset& dataset,
                             const EvalConfig& config) {
  const auto preds = detect_all(detector, dataset, config.workers);
  return evaluate_predictions(dataset, preds, config);
}

std::vector<size_t> count_false_positives_in(
    const Dataset& dataset, std::span<const std::vector<Prediction>> per_scene_preds,
    double score_threshold) {
  std::vector<size_t> counts(dataset.classes.size(), 0);
  for (size_t s = 0; s < dataset.scenes.size(); ++s) {
    for (const Prediction& pred : per_scene_preds[s]) {
      if (pred.score < score_threshold) continue;
      if (is_false_positive(pred, dataset.scenes[s].labels)) {
        ++counts[static_cast<size_t>(pred.class_id)];
      }
    }
  }
  return counts;
}

std::vector<size_t> count_false_positives(const Detector& detector,
                                          const Dataset& dataset,
                                          double score_threshold, size_t workers) {
  const auto preds = detect_all(detector, dataset, workers);
  return count_false_positives_in(dataset, preds, score_threshold);
}

std::vector<size_t> score_histogram_of_fps(const Detector& detector,
                                           const Dataset& dataset, size_t bins,
                                           size_t workers) {
  if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
  std::vector<size_t> hist(bins, 0);
  const auto preds = detect_all(detector, dataset, workers);
  for (size_t s = 0; s < dataset.scenes.size(); ++s) {
    for (const Prediction& pred : preds[s]) {
      if (!is_false_positive(pred, dataset.scenes[s].labels)) continue;
      auto bin = static_cast<size_t>(pred.score * static_cast<double>(bins));
      if (bin >= bins) bin = bins - 1;
      ++hist[bin];
    }
  }
  return hist;
}

std::optional<double> EvalResult::mean_ap() const {
  double sum = 0.0;
  size_t n = 0;
  for (const ClassEval& ce : per_class) {
    if (ce.ap) {
      sum += *ce.ap;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

void write_eval_csv(const EvalResult& result, const ClassSet& classes,
                    const std::filesystem::path& path) {
  std::ostringstream out;
  out << "class,ap,tp,fp,fn,gt\n";
  for (size_t c = 0; c < result.per_class.size(); ++c) {
    const ClassEval& ce = result.per_class[c];
    char ap_buf[32];
    if (ce.ap) {
      std::snprintf(ap_buf, sizeof(ap_buf), "%.9g", *ce.ap);
    } else {
      std::snprintf(ap_buf, sizeof(ap_buf), "nan");
    }
    out << classes.name(static_cast<int>(c)) << "," << ap_buf << "," << ce.tp << ","
        << ce.fp << "," << ce.fn << "," << ce.gt_count << "\n";
  }
  write_file_atomic(path, out.str());
}

std::vector<std::vector<Prediction>> detect_all(const Detector& detector,
                                                const Dataset& dataset,
                                                size_t workers) {
  return parallel_map(dataset.scenes.size(), workers, [&](size_t si) {
    return detector.detect(dataset.scenes[si].cloud);
  });
}

}  // namespace fpsam
