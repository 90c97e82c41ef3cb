#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fpsam/dataset.hpp"
#include "fpsam/rng.hpp"

namespace fpsam {

enum class SampleKind { kGroundTruth, kFalsePositive };

const char* to_string(SampleKind kind);

// One cropped point set with its capture-time box. GT samples carry the
// annotated class, FP samples the predicted class.
struct Sample {
  std::string id;
  int class_id = 0;
  Box3D box;
  PointCloud points;
  std::string origin_scene_id;
  SampleKind kind = SampleKind::kGroundTruth;
};

// Class-keyed sample store. Treated as an immutable value once built;
// updates publish a new database.
class SampleDatabase {
 public:
  SampleDatabase() = default;
  SampleDatabase(size_t num_classes, uint32_t generation, std::string detector_id,
                 uint32_t built_epoch)
      : per_class_(num_classes),
        generation_(generation),
        detector_id_(std::move(detector_id)),
        built_epoch_(built_epoch) {}

  size_t num_classes() const { return per_class_.size(); }
  uint32_t generation() const { return generation_; }
  const std::string& detector_id() const { return detector_id_; }
  uint32_t built_epoch() const { return built_epoch_; }

  const std::vector<Sample>& samples(int class_id) const {
    return per_class_.at(static_cast<size_t>(class_id));
  }
  size_t class_size(int class_id) const { return samples(class_id).size(); }
  size_t total_size() const;

  void add(Sample sample);

 private:
  std::vector<std::vector<Sample>> per_class_;
  uint32_t generation_ = 0;
  std::string detector_id_;
  uint32_t built_epoch_ = 0;
};

struct GtBuildReport {
  size_t total_labels = 0;
  size_t stored = 0;
  size_t skipped_below_min_points = 0;
};

struct GtBuildResult {
  SampleDatabase db;
  GtBuildReport report;
};

// One sample per ground-truth object whose box crops at least min_points
// scene points; ordering follows (scene order, label index).
GtBuildResult build_gt_database(const Dataset& dataset, size_t min_points = 5);

// Uniform draw; advances rng. Throws EmptyClassError when the class holds
// no samples.
const Sample& random_sample(const SampleDatabase& db, int class_id, Rng& rng);

// Directory layout: index.txt plus points/<sample_id>.bin in the binary
// cloud format. load(save(db)) reproduces the database.
void save_database(const SampleDatabase& db, const std::filesystem::path& dir);
SampleDatabase load_database(const std::filesystem::path& dir);

}  // namespace fpsam
