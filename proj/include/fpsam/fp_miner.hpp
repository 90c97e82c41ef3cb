#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fpsam/dataset.hpp"
#include "fpsam/sample_db.hpp"

namespace fpsam {

struct Prediction {
  Box3D box;
  int class_id = 0;
  double score = 0.0;
};

// Behavioral interface for the detector f. Implementations must be pure with
// respect to their frozen parameters for the duration of a mining pass.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<Prediction> detect(const PointCloud& cloud) const = 0;
  virtual std::string id() const = 0;
};

// True iff the prediction's box has zero IoU with every ground-truth box in
// the scene, regardless of class.
bool is_false_positive(const Prediction& pred, std::span<const ObjectLabel> gt_labels);

struct MinerConfig {
  double score_threshold = 0.1;
  size_t min_points = 5;
  size_t workers = 1;       // 0 = machine parallelism
  uint32_t built_epoch = 0; // provenance stamp for the published database
};

struct MiningReport {
  uint32_t generation = 0;
  uint32_t built_epoch = 0;
  std::string detector_id;
  std::vector<size_t> fp_per_class;
  size_t skipped_below_min_points = 0;
  size_t scenes_processed = 0;
  size_t total_scene_points = 0;  // input size audit: mining sees raw scenes

  std::string to_text(const ClassSet& classes) const;
};

struct MiningResult {
  SampleDatabase db;
  MiningReport report;
};

// Full rebuild of the FP database: runs the detector over every scene,
// keeps predictions above the score floor whose IoU with all scene labels
// is zero, and crops the scene points inside each kept box. Starts from an
// empty database; generation = previous_generation + 1.
MiningResult update_fp_database(const Detector& detector, const Dataset& dataset,
                                const MinerConfig& config,
                                uint32_t previous_generation = 0);

}  // namespace fpsam
