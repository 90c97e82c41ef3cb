#include "fpsam/augmentor.hpp"

#include <algorithm>
#include <sstream>

#include "fpsam/errors.hpp"

namespace fpsam {

const char* to_string(PlacementStatus status) {
  switch (status) {
    case PlacementStatus::kPlaced: return "placed";
    case PlacementStatus::kSkippedCollision: return "skipped_collision";
    case PlacementStatus::kSkippedEmptyClass: return "skipped_empty_class";
  }
  return "?";
}

std::string AugmentationTrace::to_text(const ClassSet& classes) const {
  std::ostringstream out;
  for (const TraceEntry& e : entries) {
    out << e.sample_id << " " << classes.name(e.class_id) << " "
        << to_string(e.kind) << " " << to_string(e.status) << " retries=" << e.retries
        << " removed_points=" << e.removed_points << "\n";
  }
  return out.str();
}

namespace {

bool collides(const Box3D& candidate, const std::vector<Box3D>& present) {
  for (const Box3D& b : present) {
    if (bev_intersection_area(candidate, b) > 0.0) return true;
  }
  return false;
}

struct Placement {
  const Sample* sample = nullptr;
  size_t trace_index = 0;
};

// One α_c/β_c draw loop for a single class and kind. `available` holds the
// not-yet-placed sample indices for this (database, class).
void place_samples(const std::vector<Sample>& class_samples,
                   std::vector<size_t>& available, size_t requested, int class_id,
                   SampleKind kind, const AugmentationPlan& plan, Rng& rng,
                   std::vector<Box3D>& present_boxes, std::vector<Placement>& placements,
                   AugmentationTrace& trace) {
  for (size_t k = 0; k < requested; ++k) {
    if (available.empty()) {
      trace.entries.push_back(TraceEntry{"-", class_id, kind,
                                         PlacementStatus::kSkippedEmptyClass, 0, 0});
      continue;
    }
    bool placed = false;
    std::string last_id;
    size_t attempt = 0;
    for (; attempt < plan.max_placement_retries; ++attempt) {
      const size_t pick = rng.uniform_index(available.size());
      const Sample& sample = class_samples[available[pick]];
      last_id = sample.id;
      if (collides(sample.box, present_boxes)) continue;
      present_boxes.push_back(sample.box);
      available.erase(available.begin() + static_cast<ptrdiff_t>(pick));
      trace.entries.push_back(
          TraceEntry{sample.id, class_id, kind, PlacementStatus::kPlaced, attempt, 0});
      placements.push_back(Placement{&sample, trace.entries.size() - 1});
      placed = true;
      break;
    }
    if (!placed) {
      trace.entries.push_back(TraceEntry{last_id, class_id, kind,
                                         PlacementStatus::kSkippedCollision, attempt, 0});
    }
  }
}

}  // namespace

AugmentedScene augment_scene(const Scene& scene, const SampleDatabase& gt_db,
                             const SampleDatabase* fp_db,
                             const AugmentationPlan& plan, Rng& rng) {
  const size_t num_classes = gt_db.num_classes();
  if (plan.gt_per_class.size() != num_classes ||
      (fp_db && plan.fp_per_class.size() != fp_db->num_classes())) {
    throw std::invalid_argument("augmentation plan class count mismatch");
  }

  AugmentedScene out;
  out.labels = scene.labels;

  std::vector<Box3D> present_boxes;
  present_boxes.reserve(scene.labels.size() + 8);
  for (const ObjectLabel& l : scene.labels) present_boxes.push_back(l.box);

  std::vector<Placement> placements;

  // Draw-without-replacement pools: indices of samples not yet placed in
  // this scene.
  auto full_pool = [](size_t n) {
    std::vector<size_t> pool(n);
    for (size_t i = 0; i < n; ++i) pool[i] = i;
    return pool;
  };

  for (size_t c = 0; c < num_classes; ++c) {
    const int class_id = static_cast<int>(c);
    std::vector<size_t> gt_pool = full_pool(gt_db.class_size(class_id));
    place_samples(gt_db.samples(class_id), gt_pool, plan.gt_per_class[c], class_id,
                  SampleKind::kGroundTruth, plan, rng, present_boxes, placements,
                  out.trace);
    if (fp_db && c < fp_db->num_classes()) {
      std::vector<size_t> fp_pool = full_pool(fp_db->class_size(class_id));
      place_samples(fp_db->samples(class_id), fp_pool, plan.fp_per_class[c], class_id,
                    SampleKind::kFalsePositive, plan, rng, present_boxes, placements,
                    out.trace);
    }
  }

  // Carve out original scene points under the placed boxes, then union the
  // sample points in placement order.
  std::vector<char> removed(scene.cloud.size(), 0);
  if (plan.carve_out) {
    for (const Placement& p : placements) {
      size_t newly_removed = 0;
      for (size_t idx : points_in_box(scene.cloud, p.sample->box)) {
        if (!removed[idx]) {
          removed[idx] = 1;
          ++newly_removed;
        }
      }
      out.trace.entries[p.trace_index].removed_points = newly_removed;
      out.trace.removed_points += newly_removed;
    }
  }

  out.cloud.reserve(scene.cloud.size());
  for (size_t i = 0; i < scene.cloud.size(); ++i) {
    if (!removed[i]) out.cloud.push_back(scene.cloud[i]);
  }
  for (const Placement& p : placements) {
    out.cloud.insert(out.cloud.end(), p.sample->points.begin(), p.sample->points.end());
    if (p.sample->kind == SampleKind::kGroundTruth) {
      out.labels.push_back(ObjectLabel{p.sample->box, p.sample->class_id});
      ++out.trace.placed_gt;
    } else {
      ++out.trace.placed_fp;
    }
  }
  return out;
}

}  // namespace fpsam
