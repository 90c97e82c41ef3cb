#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fpsam/dataset.hpp"
#include "fpsam/fp_miner.hpp"

namespace fpsam {

// BEV-cluster proposal: axis-aligned footprint (yaw 0) plus the member
// point indices of its grid component.
struct Proposal {
  Box3D box;
  int cluster_id = 0;
  std::vector<size_t> member_points;
};

inline constexpr size_t kFeatureDim = 6;
using FeatureVector = std::array<double, kFeatureDim>;

struct ClassWeights {
  std::array<double, kFeatureDim> w{};
  double bias = 0.0;
};

// Linear-logistic scorer over handcrafted crop features. Small enough to
// train on a CPU in seconds, real enough that false-positive dynamics come
// from learning.
struct ToyModelParams {
  double grid_cell = 0.5;
  double learning_rate = 0.3;
  double emit_threshold = 0.5;
  double match_threshold = 0.3;
  double positive_weight = 30.0;  // rebalances the rare positives in the loss
  std::array<double, kFeatureDim> feature_scale{0.3, 0.25, 0.6, 1.0, 0.3, 1.0};
  std::vector<ClassWeights> per_class;
};

ToyModelParams init_toy_params(size_t num_classes);

// Occupancy grid over the BEV plane; 4-connected components of occupied
// cells become proposals with tight point-extent boxes.
std::vector<Proposal> generate_proposals(const PointCloud& cloud, double grid_cell);

// Fixed-order features of the points inside `box`: log1p(count), footprint
// area, height extent of the crop, mean intensity, log1p(point density over
// the box volume), z-centroid offset from box center. Empty crop = all zeros.
FeatureVector extract_features(const PointCloud& cloud, const Box3D& box);

std::vector<Prediction> detect(const ToyModelParams& params, const PointCloud& cloud);

struct TrainStepResult {
  ToyModelParams params;
  double loss = 0.0;
};

// One gradient-descent step of per-class logistic loss on the scene's
// proposals. A proposal is positive for class c when its IoU with some
// label of class c reaches match_threshold; everything else is negative,
// so injected FP crops become hard negatives.
TrainStepResult train_step(const ToyModelParams& params, const PointCloud& cloud,
                           std::span<const ObjectLabel> labels);

// Loss and analytic gradient at the current params; exposed so tests can
// check the gradient against finite differences.
double training_loss(const ToyModelParams& params, const PointCloud& cloud,
                     std::span<const ObjectLabel> labels);
std::vector<ClassWeights> training_gradient(const ToyModelParams& params,
                                            const PointCloud& cloud,
                                            std::span<const ObjectLabel> labels);

// Text checkpoint, exact round-trip.
void save_checkpoint(const ToyModelParams& params, const std::filesystem::path& path);
ToyModelParams load_checkpoint(const std::filesystem::path& path);

class ToyDetector : public Detector {
 public:
  explicit ToyDetector(ToyModelParams params) : params_(std::move(params)) {}

  std::vector<Prediction> detect(const PointCloud& cloud) const override {
    return fpsam::detect(params_, cloud);
  }
  std::string id() const override { return "toy"; }

  const ToyModelParams& params() const { return params_; }

 private:
  ToyModelParams params_;
};

}  // namespace fpsam
