#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <fstream>
#include <map>

#include "fpsam/errors.hpp"
#include "fpsam/sample_db.hpp"
#include "test_util.hpp"

using namespace fpsam;
using fpsam::testutil::TempDir;

namespace {

// A scene with `cars` cars along the x axis, `pts_each` points per car.
Scene car_scene(const std::string& id, int cars, int pts_each) {
  Scene scene;
  scene.id = id;
  for (int i = 0; i < cars; ++i) {
    const double cx = 10.0 * i;
    scene.labels.push_back(ObjectLabel{make_box(cx, 0, 0.75, 4, 1.8, 1.5, 0), 0});
    for (int p = 0; p < pts_each; ++p) {
      scene.cloud.push_back(Point{static_cast<float>(cx + 0.1 * p - 0.5), 0.0f, 0.75f,
                                  0.5f});
    }
  }
  return scene;
}

Dataset one_class_dataset(std::vector<Scene> scenes) {
  Dataset ds;
  ds.classes = ClassSet({"car"});
  ds.scenes = std::move(scenes);
  return ds;
}

}  // namespace

TEST_CASE("build_gt_database stores one sample per sufficiently dense label") {
  const Dataset ds = one_class_dataset({car_scene("a", 3, 8)});
  const GtBuildResult built = build_gt_database(ds, 5);
  CHECK(built.db.class_size(0) == 3);
  CHECK(built.report.stored == 3);
  CHECK(built.report.skipped_below_min_points == 0);
  for (const Sample& s : built.db.samples(0)) {
    CHECK(s.kind == SampleKind::kGroundTruth);
    CHECK(s.origin_scene_id == "a");
    CHECK(s.points.size() == 8);
    // Points-inside invariant, checked through the geometry module.
    CHECK(points_in_box(s.points, s.box).size() == s.points.size());
  }
}

TEST_CASE("build_gt_database skips empty boxes and counts them") {
  Scene scene = car_scene("a", 1, 8);
  // A labeled box far from every point.
  scene.labels.push_back(ObjectLabel{make_box(500, 500, 1, 4, 2, 1.5, 0), 0});
  const GtBuildResult built = build_gt_database(one_class_dataset({scene}), 5);
  CHECK(built.db.class_size(0) == 1);
  CHECK(built.report.total_labels == 2);
  CHECK(built.report.skipped_below_min_points == 1);
}

TEST_CASE("build_gt_database count identity over a synthetic dataset") {
  const Dataset ds = generate_synthetic_dataset(testutil::reference_spec(10), 21);
  const size_t min_points = 5;
  const GtBuildResult built = build_gt_database(ds, min_points);
  size_t expected = 0;
  for (const Scene& s : ds.scenes) {
    for (const ObjectLabel& l : s.labels) {
      if (points_in_box(s.cloud, l.box).size() >= min_points) ++expected;
    }
  }
  CHECK(built.db.total_size() == expected);
  CHECK(built.report.stored == expected);
  for (size_t c = 0; c < ds.classes.size(); ++c) {
    for (const Sample& s : built.db.samples(static_cast<int>(c))) {
      CHECK(points_in_box(s.points, s.box).size() == s.points.size());
      CHECK_FALSE(s.points.empty());
    }
  }
}

TEST_CASE("random_sample draws uniformly and deterministically") {
  SampleDatabase db(1, 0, "gt", 0);
  for (int i = 0; i < 4; ++i) {
    Sample s;
    s.id = "gt_x_" + std::to_string(i);
    s.class_id = 0;
    s.box = make_box(0, 0, 0, 1, 1, 1, 0);
    s.points = {Point{0, 0, 0, 0}};
    db.add(std::move(s));
  }

  SUBCASE("single-sample class returns that sample") {
    SampleDatabase single(1, 0, "gt", 0);
    Sample s;
    s.id = "only";
    s.class_id = 0;
    s.box = make_box(0, 0, 0, 1, 1, 1, 0);
    s.points = {Point{0, 0, 0, 0}};
    single.add(std::move(s));
    Rng rng(1);
    CHECK(random_sample(single, 0, rng).id == "only");
  }

  SUBCASE("fixed seed reproduces the draw sequence") {
    Rng a(42), b(42);
    for (int i = 0; i < 10; ++i) {
      CHECK(random_sample(db, 0, a).id == random_sample(db, 0, b).id);
    }
  }

  SUBCASE("frequencies stay within 5 sigma of uniform") {
    Rng rng(7);
    std::map<std::string, int> freq;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) ++freq[random_sample(db, 0, rng).id];
    const double expected = draws / 4.0;
    const double sigma = std::sqrt(draws * 0.25 * 0.75);
    for (const auto& [id, count] : freq) {
      CHECK(std::fabs(count - expected) <= 5.0 * sigma);
    }
  }

  SUBCASE("empty class raises an explicit error") {
    SampleDatabase empty(2, 0, "gt", 0);
    Rng rng(1);
    CHECK_THROWS_AS(random_sample(empty, 1, rng), EmptyClassError);
  }
}

TEST_CASE("database persistence round-trip") {
  TempDir tmp("db");
  const Dataset ds = generate_synthetic_dataset(testutil::reference_spec(8), 3);
  const SampleDatabase db = build_gt_database(ds, 5).db;
  REQUIRE(db.total_size() >= 10);
  save_database(db, tmp.path);
  const SampleDatabase loaded = load_database(tmp.path);
  CHECK(loaded.num_classes() == db.num_classes());
  CHECK(loaded.generation() == db.generation());
  CHECK(loaded.detector_id() == db.detector_id());
  CHECK(loaded.built_epoch() == db.built_epoch());
  REQUIRE(loaded.total_size() == db.total_size());
  for (size_t c = 0; c < db.num_classes(); ++c) {
    const auto& a = db.samples(static_cast<int>(c));
    const auto& b = loaded.samples(static_cast<int>(c));
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].id == b[i].id);
      CHECK(a[i].origin_scene_id == b[i].origin_scene_id);
      CHECK(a[i].kind == b[i].kind);
      CHECK(testutil::points_equal(a[i].points, b[i].points));
      for (int k = 0; k < 3; ++k) {
        CHECK(std::fabs(a[i].box.center[k] - b[i].box.center[k]) <= 1e-6);
      }
      CHECK(std::fabs(a[i].box.yaw - b[i].box.yaw) <= 1e-6);
    }
  }
}

TEST_CASE("load_database: missing point file names the sample") {
  TempDir tmp("db");
  const Dataset ds = one_class_dataset({car_scene("a", 2, 8)});
  const SampleDatabase db = build_gt_database(ds, 5).db;
  save_database(db, tmp.path);
  std::filesystem::remove(tmp.path / "points" / "gt_a_001.bin");
  CHECK_THROWS_WITH_AS(load_database(tmp.path), doctest::Contains("gt_a_001"),
                       FormatError);
}

TEST_CASE("load_database: point count mismatch is rejected") {
  TempDir tmp("db");
  const Dataset ds = one_class_dataset({car_scene("a", 1, 8)});
  save_database(build_gt_database(ds, 5).db, tmp.path);
  // Truncate the point file to one record.
  PointCloud one = {Point{0, 0, 0, 0}};
  save_point_cloud(one, tmp.path / "points" / "gt_a_000.bin");
  CHECK_THROWS_WITH_AS(load_database(tmp.path), doctest::Contains("gt_a_000"),
                       FormatError);
}

TEST_CASE("load_database: corrupt index is rejected") {
  TempDir tmp("db");
  std::filesystem::create_directories(tmp.path);
  std::ofstream(tmp.path / "index.txt") << "not a database\n";
  CHECK_THROWS_AS(load_database(tmp.path), FormatError);
  CHECK_THROWS_AS(load_database(tmp.path / "missing"), FormatError);
}

TEST_CASE("hand-built one-sample directory loads to the expected sample") {
  TempDir tmp("db");
  std::filesystem::create_directories(tmp.path / "points");
  const PointCloud pts = {Point{1.0f, 2.0f, 0.5f, 0.25f}, Point{1.2f, 2.1f, 0.6f, 0.5f},
                          Point{0.9f, 1.9f, 0.4f, 0.75f}};
  save_point_cloud(pts, tmp.path / "points" / "fp_g2_s9_000.bin");
  std::ofstream(tmp.path / "index.txt")
      << "fpsam_sample_db v1\n"
      << "generation 2\n"
      << "detector toy\n"
      << "built_epoch 12\n"
      << "classes 3\n"
      << "samples 1\n"
      << "fp_g2_s9_000 1 1 2 0.5 1.5 1.5 1.5 0 s9 FP 3 points/fp_g2_s9_000.bin\n";
  const SampleDatabase db = load_database(tmp.path);
  CHECK(db.generation() == 2);
  CHECK(db.detector_id() == "toy");
  CHECK(db.built_epoch() == 12);
  REQUIRE(db.class_size(1) == 1);
  const Sample& s = db.samples(1)[0];
  CHECK(s.id == "fp_g2_s9_000");
  CHECK(s.kind == SampleKind::kFalsePositive);
  CHECK(s.origin_scene_id == "s9");
  CHECK(testutil::points_equal(s.points, pts));
  CHECK(s.box.center[0] == 1.0);
}
