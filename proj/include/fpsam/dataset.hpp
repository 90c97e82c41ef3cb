#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fpsam/geometry.hpp"
#include "fpsam/point_cloud.hpp"

namespace fpsam {

struct ObjectLabel {
  Box3D box;
  int class_id = 0;
};

struct Scene {
  std::string id;
  PointCloud cloud;
  std::vector<ObjectLabel> labels;
};

// Ordered class names; position defines class_id.
class ClassSet {
 public:
  ClassSet() = default;
  explicit ClassSet(std::vector<std::string> names);

  int index_of(std::string_view name) const;  // -1 when unknown
  const std::string& name(int class_id) const;
  size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  bool operator==(const ClassSet&) const = default;

 private:
  std::vector<std::string> names_;
};

struct Dataset {
  ClassSet classes;
  std::vector<Scene> scenes;
};

// Binary point cloud: consecutive records of four little-endian float32
// (x, y, z, intensity). Load rejects truncated files and non-finite
// coordinates; save/load round-trips bit-exactly.
PointCloud load_point_cloud(const std::filesystem::path& path);
void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path);

// Text labels, one object per line:
//   class_name cx cy cz length width height yaw
std::vector<ObjectLabel> load_labels(const std::filesystem::path& path,
                                     const ClassSet& classes);
void save_labels(std::span<const ObjectLabel> labels, const ClassSet& classes,
                 const std::filesystem::path& path);

ClassSet load_class_set(const std::filesystem::path& path);
void save_class_set(const ClassSet& classes, const std::filesystem::path& path);

// Dataset directory: clouds/<scene_id>.bin, labels/<scene_id>.txt,
// classes.txt. Scenes load sorted by scene_id.
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// Synthetic-scene generation: objects with class-dependent dims placed
// without footprint overlap, bush-like clutter clumps (unlabeled, the hard
// negatives), and sparse ground clutter.
struct ClassGenSpec {
  std::string name;
  double length = 1.0;
  double width = 1.0;
  double height = 1.0;
  int min_count = 0;
  int max_count = 0;
};

struct SyntheticSpec {
  size_t scene_count = 0;
  double extent = 40.0;          // scenes span [-extent/2, extent/2] in x and y
  size_t clutter_points = 200;   // scattered ground returns per scene
  int clump_min = 2;             // bush-like clumps per scene
  int clump_max = 5;
  double dim_jitter = 0.08;      // relative perturbation of object dims
  double points_per_m2 = 10.0;   // object point density over footprint
  size_t min_object_points = 14;
  int max_place_retries = 100;
  std::vector<ClassGenSpec> classes;
};

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);
Dataset generate_synthetic_dataset(const SyntheticSpec& spec, uint64_t seed);

}  // namespace fpsam
