#include "fpsam/sample_db.hpp"

#include <cstdio>
#include <sstream>

#include "fpsam/errors.hpp"
#include "fpsam/io_util.hpp"

namespace fs = std::filesystem;

namespace fpsam {

const char* to_string(SampleKind kind) {
  return kind == SampleKind::kGroundTruth ? "GT" : "FP";
}

size_t SampleDatabase::total_size() const {
  size_t n = 0;
  for (const auto& list : per_class_) n += list.size();
  return n;
}

void SampleDatabase::add(Sample sample) {
  per_class_.at(static_cast<size_t>(sample.class_id)).push_back(std::move(sample));
}

GtBuildResult build_gt_database(const Dataset& dataset, size_t min_points) {
  GtBuildResult result;
  result.db = SampleDatabase(dataset.classes.size(), 0, "gt", 0);
  for (const Scene& scene : dataset.scenes) {
    for (size_t li = 0; li < scene.labels.size(); ++li) {
      const ObjectLabel& label = scene.labels[li];
      ++result.report.total_labels;
      const std::vector<size_t> inside = points_in_box(scene.cloud, label.box);
      if (inside.size() < min_points) {
        ++result.report.skipped_below_min_points;
        continue;
      }
      Sample s;
      {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "gt_%s_%03zu", scene.id.c_str(), li);
        s.id = buf;
      }
      s.class_id = label.class_id;
      s.box = label.box;
      s.points.reserve(inside.size());
      for (size_t idx : inside) s.points.push_back(scene.cloud[idx]);
      s.origin_scene_id = scene.id;
      s.kind = SampleKind::kGroundTruth;
      result.db.add(std::move(s));
      ++result.report.stored;
    }
  }
  return result;
}

const Sample& random_sample(const SampleDatabase& db, int class_id, Rng& rng) {
  const auto& list = db.samples(class_id);
  if (list.empty()) {
    throw EmptyClassError("no samples stored for class id " + std::to_string(class_id));
  }
  return list[rng.uniform_index(list.size())];
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_database(const SampleDatabase& db, const fs::path& dir) {
  fs::create_directories(dir / "points");
  std::string index;
  index += "fpsam_sample_db v1\n";
  index += "generation " + std::to_string(db.generation()) + "\n";
  index += "detector " + (db.detector_id().empty() ? std::string("-") : db.detector_id()) + "\n";
  index += "built_epoch " + std::to_string(db.built_epoch()) + "\n";
  index += "classes " + std::to_string(db.num_classes()) + "\n";
  index += "samples " + std::to_string(db.total_size()) + "\n";
  for (size_t c = 0; c < db.num_classes(); ++c) {
    for (const Sample& s : db.samples(static_cast<int>(c))) {
      const std::string rel = "points/" + s.id + ".bin";
      index += s.id + " " + std::to_string(s.class_id) + " " +
               format_double(s.box.center[0]) + " " + format_double(s.box.center[1]) +
               " " + format_double(s.box.center[2]) + " " + format_double(s.box.length) +
               " " + format_double(s.box.width) + " " + format_double(s.box.height) +
               " " + format_double(s.box.yaw) + " " + s.origin_scene_id + " " +
               to_string(s.kind) + " " + std::to_string(s.points.size()) + " " + rel + "\n";
      save_point_cloud(s.points, dir / rel);
    }
  }
  write_file_atomic(dir / "index.txt", index);
}

SampleDatabase load_database(const fs::path& dir) {
  const fs::path index_path = dir / "index.txt";
  const std::string text = read_file(index_path);
  std::istringstream in(text);
  std::string line;

  auto next_line = [&](const char* what) {
    if (!std::getline(in, line)) {
      throw FormatError(index_path.string() + ": truncated index, missing " +
                        std::string(what));
    }
    return line;
  };

  if (next_line("magic") != "fpsam_sample_db v1") {
    throw FormatError(index_path.string() + ": bad magic line");
  }
  auto header_u64 = [&](const std::string& key) {
    next_line(key.c_str());
    std::istringstream ls(line);
    std::string k;
    uint64_t v = 0;
    if (!(ls >> k >> v) || k != key) {
      throw FormatError(index_path.string() + ": expected '" + key + " <n>', got '" +
                        line + "'");
    }
    return v;
  };
  const auto generation = static_cast<uint32_t>(header_u64("generation"));
  next_line("detector");
  std::string detector_id;
  {
    std::istringstream ls(line);
    std::string k;
    if (!(ls >> k >> detector_id) || k != "detector") {
      throw FormatError(index_path.string() + ": expected 'detector <id>'");
    }
    if (detector_id == "-") detector_id.clear();
  }
  const auto built_epoch = static_cast<uint32_t>(header_u64("built_epoch"));
  const auto classes = header_u64("classes");
  const auto sample_count = header_u64("samples");

  SampleDatabase db(classes, generation, detector_id, built_epoch);
  for (uint64_t i = 0; i < sample_count; ++i) {
    next_line("sample record");
    std::istringstream ls(line);
    Sample s;
    double v[7];
    std::string kind, rel;
    size_t point_count = 0;
    if (!(ls >> s.id >> s.class_id >> v[0] >> v[1] >> v[2] >> v[3] >> v[4] >> v[5] >>
          v[6] >> s.origin_scene_id >> kind >> point_count >> rel)) {
      throw FormatError(index_path.string() + ": malformed sample record '" + line + "'");
    }
    s.box = Box3D{{v[0], v[1], v[2]}, v[3], v[4], v[5], v[6]};
    if (kind == "GT") {
      s.kind = SampleKind::kGroundTruth;
    } else if (kind == "FP") {
      s.kind = SampleKind::kFalsePositive;
    } else {
      throw FormatError(index_path.string() + ": sample " + s.id + " has unknown kind '" +
                        kind + "'");
    }
    if (s.class_id < 0 || static_cast<uint64_t>(s.class_id) >= classes) {
      throw FormatError(index_path.string() + ": sample " + s.id + " has class id " +
                        std::to_string(s.class_id) + " outside [0, " +
                        std::to_string(classes) + ")");
    }
    const fs::path point_path = dir / rel;
    if (!fs::exists(point_path)) {
      throw FormatError(index_path.string() + ": sample " + s.id +
                        " references missing point file " + rel);
    }
    s.points = load_point_cloud(point_path);
    if (s.points.size() != point_count) {
      throw FormatError(index_path.string() + ": sample " + s.id + " expects " +
                        std::to_string(point_count) + " points, file holds " +
                        std::to_string(s.points.size()));
    }
    db.add(std::move(s));
  }
  return db;
}

}  // namespace fpsam
