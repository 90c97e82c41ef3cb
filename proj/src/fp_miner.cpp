#include "fpsam/fp_miner.hpp"

#include <cstdio>
#include <sstream>

#include "fpsam/errors.hpp"
#include "fpsam/parallel.hpp"

namespace fpsam {

bool is_false_positive(const Prediction& pred, std::span<const ObjectLabel> gt_labels) {
  for (const ObjectLabel& gt : gt_labels) {
    if (iou_3d(pred.box, gt.box) > 0.0) return false;
  }
  return true;
}

std::string MiningReport::to_text(const ClassSet& classes) const {
  std::ostringstream out;
  out << "fp mining report\n";
  out << "generation " << generation << "\n";
  out << "built_epoch " << built_epoch << "\n";
  out << "detector " << (detector_id.empty() ? "-" : detector_id) << "\n";
  out << "scenes " << scenes_processed << "\n";
  out << "scene_points " << total_scene_points << "\n";
  size_t total = 0;
  for (size_t c = 0; c < fp_per_class.size(); ++c) {
    out << "fp_" << classes.name(static_cast<int>(c)) << " " << fp_per_class[c] << "\n";
    total += fp_per_class[c];
  }
  out << "fp_total " << total << "\n";
  out << "skipped_below_min_points " << skipped_below_min_points << "\n";
  return out.str();
}

MiningResult update_fp_database(const Detector& detector, const Dataset& dataset,
                                const MinerConfig& config,
                                uint32_t previous_generation) {
  const uint32_t generation = previous_generation + 1;

  struct SceneMined {
    std::vector<Sample> samples;
    size_t skipped = 0;
    size_t points = 0;
  };

  // Scenes mine independently against the frozen detector; results merge in
  // dataset order so the pass is deterministic for any worker count.
  auto mined = parallel_map(dataset.scenes.size(), config.workers, [&](size_t si) {
    const Scene& scene = dataset.scenes[si];
    SceneMined out;
    out.points = scene.cloud.size();
    std::vector<Prediction> preds;
    try {
      preds = detector.detect(scene.cloud);
    } catch (const std::exception& e) {
      throw MiningError("detector failed on scene " + scene.id + ": " + e.what());
    }
    size_t kept = 0;
    for (const Prediction& pred : preds) {
      if (pred.score < config.score_threshold) continue;
      if (!is_false_positive(pred, scene.labels)) continue;
      const std::vector<size_t> inside = points_in_box(scene.cloud, pred.box);
      if (inside.size() < config.min_points) {
        ++out.skipped;
        continue;
      }
      Sample s;
      {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "fp_g%u_%s_%03zu", generation,
                      scene.id.c_str(), kept);
        s.id = buf;
      }
      ++kept;
      s.class_id = pred.class_id;
      s.box = pred.box;
      s.points.reserve(inside.size());
      for (size_t idx : inside) s.points.push_back(scene.cloud[idx]);
      s.origin_scene_id = scene.id;
      s.kind = SampleKind::kFalsePositive;
      out.samples.push_back(std::move(s));
    }
    return out;
  });

  MiningResult result;
  result.db = SampleDatabase(dataset.classes.size(), generation, detector.id(),
                             config.built_epoch);
  result.report.generation = generation;
  result.report.built_epoch = config.built_epoch;
  result.report.detector_id = detector.id();
  result.report.fp_per_class.assign(dataset.classes.size(), 0);
  for (SceneMined& m : mined) {
    result.report.skipped_below_min_points += m.skipped;
    result.report.total_scene_points += m.points;
    ++result.report.scenes_processed;
    for (Sample& s : m.samples) {
      ++result.report.fp_per_class[static_cast<size_t>(s.class_id)];
      result.db.add(std::move(s));
    }
  }
  return result;
}

}  // namespace fpsam
