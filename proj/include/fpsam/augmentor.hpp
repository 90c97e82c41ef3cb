#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fpsam/dataset.hpp"
#include "fpsam/rng.hpp"
#include "fpsam/sample_db.hpp"

namespace fpsam {

// Per-class insertion counts: gt_per_class[c] GT samples (with labels) and
// fp_per_class[c] FP samples (points only) per scene.
struct AugmentationPlan {
  std::vector<size_t> gt_per_class;
  std::vector<size_t> fp_per_class;
  size_t max_placement_retries = 10;
  bool carve_out = true;  // drop scene points under inserted boxes
};

enum class PlacementStatus { kPlaced, kSkippedCollision, kSkippedEmptyClass };

const char* to_string(PlacementStatus status);

struct TraceEntry {
  std::string sample_id;  // "-" when the class had nothing left to draw
  int class_id = 0;
  SampleKind kind = SampleKind::kGroundTruth;
  PlacementStatus status = PlacementStatus::kPlaced;
  size_t retries = 0;
  size_t removed_points = 0;
};

struct AugmentationTrace {
  std::vector<TraceEntry> entries;
  size_t placed_gt = 0;
  size_t placed_fp = 0;
  size_t removed_points = 0;

  std::string to_text(const ClassSet& classes) const;
};

struct AugmentedScene {
  PointCloud cloud;
  std::vector<ObjectLabel> labels;
  AugmentationTrace trace;
};

// Joint GT+FP insertion. Samples land at their stored pose; a draw is placed
// only when its footprint has zero BEV intersection with the scene's labeled
// boxes and every box placed before it. Placed GT samples extend the label
// list; placed FP samples never do. Deterministic given rng.
AugmentedScene augment_scene(const Scene& scene, const SampleDatabase& gt_db,
                             const SampleDatabase* fp_db,
                             const AugmentationPlan& plan, Rng& rng);

}  // namespace fpsam
