#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "fpsam/errors.hpp"
#include "fpsam/fp_miner.hpp"
#include "test_util.hpp"

using namespace fpsam;
using fpsam::testutil::FunctionDetector;

namespace {

std::vector<ObjectLabel> one_gt() {
  return {ObjectLabel{make_box(0, 0, 0.75, 4, 2, 1.5, 0), 0}};
}

// Two-class dataset: each scene has one labeled car with points, plus a
// 10-point clutter patch at (20, 0) that no label covers.
Dataset mining_fixture(int scenes) {
  Dataset ds;
  ds.classes = ClassSet({"car", "pedestrian"});
  for (int i = 0; i < scenes; ++i) {
    Scene s;
    s.id = "m" + std::to_string(i);
    s.labels = one_gt();
    for (int p = 0; p < 12; ++p) {
      s.cloud.push_back(Point{static_cast<float>(-1.5 + 0.25 * p), 0.0f, 0.75f, 0.6f});
    }
    for (int p = 0; p < 10; ++p) {
      s.cloud.push_back(
          Point{static_cast<float>(19.6 + 0.08 * p), 0.0f, 0.4f, 0.3f});
    }
    ds.scenes.push_back(std::move(s));
  }
  return ds;
}

const Box3D kSpuriousBox = make_box(20, 0, 0.4, 1.5, 1.0, 1.0, 0);

}  // namespace

TEST_CASE("is_false_positive follows the IoU-zero rule") {
  const auto gts = one_gt();

  // Overlapping the GT with IoU 1/3 is not an FP.
  Prediction overlapping{make_box(2, 0, 0.75, 4, 2, 1.5, 0), 0, 0.9};
  CHECK(iou_3d(overlapping.box, gts[0].box) == doctest::Approx(1.0 / 3.0));
  CHECK_FALSE(is_false_positive(overlapping, gts));

  Prediction far{make_box(50, 0, 0.75, 4, 2, 1.5, 0), 0, 0.9};
  CHECK(is_false_positive(far, gts));

  // Shared edge: zero-area overlap counts as a false positive.
  Prediction touching{make_box(4, 0, 0.75, 4, 2, 1.5, 0), 0, 0.9};
  CHECK(bev_intersection_area(touching.box, gts[0].box) == 0.0);
  CHECK(is_false_positive(touching, gts));

  // Class labels play no role: a pedestrian prediction on the car is no FP.
  Prediction wrong_class{make_box(0, 0, 0.75, 4, 2, 1.5, 0), 1, 0.9};
  CHECK_FALSE(is_false_positive(wrong_class, gts));

  CHECK(is_false_positive(Prediction{kSpuriousBox, 0, 0.5}, {}));
}

TEST_CASE("oracle detector yields an empty FP database") {
  const Dataset ds = mining_fixture(5);
  const FunctionDetector oracle("oracle", [&](const PointCloud&) {
    std::vector<Prediction> preds;
    preds.push_back(Prediction{one_gt()[0].box, 0, 1.0});
    return preds;
  });
  const MiningResult mined = update_fp_database(oracle, ds, MinerConfig{});
  CHECK(mined.db.total_size() == 0);
  CHECK(mined.db.generation() == 1);
  CHECK(mined.report.scenes_processed == 5);
}

TEST_CASE("spurious boxes over points become FP samples with the predicted class") {
  const Dataset ds = mining_fixture(3);
  const FunctionDetector spurious("spurious", [&](const PointCloud&) {
    return std::vector<Prediction>{Prediction{one_gt()[0].box, 0, 1.0},
                                   Prediction{kSpuriousBox, 1, 0.7}};
  });
  const MiningResult mined = update_fp_database(spurious, ds, MinerConfig{});
  CHECK(mined.db.class_size(0) == 0);
  REQUIRE(mined.db.class_size(1) == 3);  // one per scene, predicted class
  for (const Sample& s : mined.db.samples(1)) {
    CHECK(s.kind == SampleKind::kFalsePositive);
    CHECK(s.points.size() == 10);  // the clutter patch
    // Recheck the defining property against the origin scene.
    for (const Scene& scene : ds.scenes) {
      if (scene.id != s.origin_scene_id) continue;
      std::vector<Box3D> gt_boxes;
      for (const ObjectLabel& l : scene.labels) gt_boxes.push_back(l.box);
      CHECK(max_iou_with_gt(s.box, gt_boxes) == 0.0);
    }
  }
  CHECK(mined.report.fp_per_class[1] == 3);
}

TEST_CASE("boxes over empty space are skipped by the min-points rule") {
  const Dataset ds = mining_fixture(2);
  const FunctionDetector empty_box("eb", [&](const PointCloud&) {
    return std::vector<Prediction>{
        Prediction{make_box(-20, -20, 0.5, 2, 2, 1, 0), 0, 0.9}};
  });
  const MiningResult mined = update_fp_database(empty_box, ds, MinerConfig{});
  CHECK(mined.db.total_size() == 0);
  CHECK(mined.report.skipped_below_min_points == 2);
}

TEST_CASE("score threshold filters low-confidence predictions monotonically") {
  const Dataset ds = mining_fixture(4);
  const FunctionDetector det("det", [&](const PointCloud&) {
    return std::vector<Prediction>{Prediction{kSpuriousBox, 0, 0.3},
                                   Prediction{make_box(-20, 0, 0.4, 1.5, 1, 1, 0), 1, 0.05}};
  });
  size_t previous = SIZE_MAX;
  for (double threshold : {0.0, 0.1, 0.3, 0.5, 1.0}) {
    MinerConfig cfg;
    cfg.score_threshold = threshold;
    const size_t count = update_fp_database(det, ds, cfg).db.total_size();
    CHECK(count <= previous);
    previous = count;
  }
  MinerConfig cfg;
  cfg.score_threshold = 0.1;
  CHECK(update_fp_database(det, ds, cfg).db.total_size() == 4);  // 0.05 filtered
}

TEST_CASE("rebuilds reset: no sample ids survive across generations") {
  const Dataset ds = mining_fixture(3);
  const FunctionDetector det("det", [&](const PointCloud&) {
    return std::vector<Prediction>{Prediction{kSpuriousBox, 1, 0.8}};
  });
  const MiningResult gen1 = update_fp_database(det, ds, MinerConfig{}, 0);
  const MiningResult gen2 = update_fp_database(det, ds, MinerConfig{}, gen1.db.generation());
  CHECK(gen1.db.generation() == 1);
  CHECK(gen2.db.generation() == 2);
  std::set<std::string> ids1, ids2;
  for (size_t c = 0; c < 2; ++c) {
    for (const Sample& s : gen1.db.samples(static_cast<int>(c))) ids1.insert(s.id);
    for (const Sample& s : gen2.db.samples(static_cast<int>(c))) ids2.insert(s.id);
  }
  CHECK(ids1.size() == 3);
  CHECK(ids2.size() == 3);
  for (const std::string& id : ids2) CHECK(ids1.count(id) == 0);
}

TEST_CASE("empty-prediction detector yields an empty database") {
  const Dataset ds = mining_fixture(3);
  const FunctionDetector silent("silent", [](const PointCloud&) {
    return std::vector<Prediction>{};
  });
  CHECK(update_fp_database(silent, ds, MinerConfig{}).db.total_size() == 0);
}

TEST_CASE("detector failure aborts the pass naming the scene") {
  const Dataset ds = mining_fixture(3);
  const FunctionDetector flaky("flaky", [&](const PointCloud& cloud) {
    if (&cloud == &ds.scenes[1].cloud) {
      throw std::runtime_error("backend unavailable");
    }
    return std::vector<Prediction>{};
  });
  CHECK_THROWS_WITH_AS(update_fp_database(flaky, ds, MinerConfig{}),
                       doctest::Contains("m1"), MiningError);
}

TEST_CASE("mining is deterministic across worker counts") {
  const Dataset ds = mining_fixture(6);
  const FunctionDetector det("det", [&](const PointCloud&) {
    return std::vector<Prediction>{Prediction{kSpuriousBox, 1, 0.8}};
  });
  MinerConfig one;
  one.workers = 1;
  MinerConfig four;
  four.workers = 4;
  const MiningResult a = update_fp_database(det, ds, one);
  const MiningResult b = update_fp_database(det, ds, four);
  REQUIRE(a.db.total_size() == b.db.total_size());
  for (size_t c = 0; c < 2; ++c) {
    const auto& sa = a.db.samples(static_cast<int>(c));
    const auto& sb = b.db.samples(static_cast<int>(c));
    REQUIRE(sa.size() == sb.size());
    for (size_t i = 0; i < sa.size(); ++i) CHECK(sa[i].id == sb[i].id);
  }
}

TEST_CASE("mining report carries the audit fields") {
  const Dataset ds = mining_fixture(2);
  const FunctionDetector det("toy", [&](const PointCloud&) {
    return std::vector<Prediction>{Prediction{kSpuriousBox, 0, 0.9}};
  });
  const MiningResult mined = update_fp_database(det, ds, MinerConfig{});
  size_t total_points = 0;
  for (const Scene& s : ds.scenes) total_points += s.cloud.size();
  CHECK(mined.report.total_scene_points == total_points);
  const std::string text = mined.report.to_text(ds.classes);
  CHECK(text.find("generation 1") != std::string::npos);
  CHECK(text.find("fp_car 2") != std::string::npos);
  CHECK(text.find("scene_points " + std::to_string(total_points)) != std::string::npos);
}
