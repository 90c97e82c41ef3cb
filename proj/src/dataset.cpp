#include "fpsam/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "fpsam/config.hpp"
#include "fpsam/errors.hpp"
#include "fpsam/io_util.hpp"
#include "fpsam/rng.hpp"

namespace fs = std::filesystem;

namespace fpsam {

static_assert(sizeof(float) == 4, "point cloud format needs 32-bit floats");

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

constexpr size_t kRecordBytes = 16;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_field_double(const std::string& token, const fs::path& path,
                          size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') {
    throw FormatError(path.string() + ":" + std::to_string(line_no) +
                      ": non-numeric field '" + token + "'");
  }
  return v;
}

}  // namespace

ClassSet::ClassSet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw FormatError("class set must be nonempty");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw FormatError("class set contains an empty name");
    if (!seen.insert(n).second) {
      throw FormatError("duplicate class name '" + n + "'");
    }
  }
}

int ClassSet::index_of(std::string_view name) const {
  for (size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  return -1;
}

const std::string& ClassSet::name(int class_id) const {
  return names_.at(static_cast<size_t>(class_id));
}

PointCloud load_point_cloud(const fs::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() % kRecordBytes != 0) {
    throw FormatError(path.string() + ": length " + std::to_string(bytes.size()) +
                      " bytes is not a multiple of " + std::to_string(kRecordBytes));
  }
  const size_t count = bytes.size() / kRecordBytes;
  PointCloud cloud(count);
  if (count > 0) std::memcpy(cloud.data(), bytes.data(), bytes.size());
  for (size_t i = 0; i < count; ++i) {
    const Point& p = cloud[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw FormatError(path.string() + ": non-finite coordinate in record " +
                        std::to_string(i));
    }
  }
  return cloud;
}

void save_point_cloud(const PointCloud& cloud, const fs::path& path) {
  std::string bytes(cloud.size() * kRecordBytes, '\0');
  if (!cloud.empty()) std::memcpy(bytes.data(), cloud.data(), bytes.size());
  write_file_atomic(path, bytes);
}

std::vector<ObjectLabel> load_labels(const fs::path& path, const ClassSet& classes) {
  const std::string text = read_file(path);
  std::vector<ObjectLabel> labels;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (fields >> tok) tokens.push_back(tok);
    if (tokens.size() != 8) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 8 fields, got " + std::to_string(tokens.size()));
    }
    const int class_id = classes.index_of(tokens[0]);
    if (class_id < 0) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": unknown class name '" + tokens[0] + "'");
    }
    double v[7];
    for (size_t i = 0; i < 7; ++i) {
      v[i] = parse_field_double(tokens[i + 1], path, line_no);
    }
    ObjectLabel label;
    label.class_id = class_id;
    label.box = make_box(v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
    if (!box_is_valid(label.box)) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": invalid box dimensions");
    }
    labels.push_back(label);
  }
  return labels;
}

void save_labels(std::span<const ObjectLabel> labels, const ClassSet& classes,
                 const fs::path& path) {
  std::string out;
  for (const ObjectLabel& l : labels) {
    out += classes.name(l.class_id);
    out += ' ';
    out += format_double(l.box.center[0]) + ' ' + format_double(l.box.center[1]) +
           ' ' + format_double(l.box.center[2]) + ' ' + format_double(l.box.length) +
           ' ' + format_double(l.box.width) + ' ' + format_double(l.box.height) +
           ' ' + format_double(l.box.yaw);
    out += '\n';
  }
  write_file_atomic(path, out);
}

ClassSet load_class_set(const fs::path& path) {
  const std::string text = read_file(path);
  std::vector<std::string> names;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  return ClassSet(std::move(names));
}

void save_class_set(const ClassSet& classes, const fs::path& path) {
  std::string out;
  for (const auto& n : classes.names()) {
    out += n;
    out += '\n';
  }
  write_file_atomic(path, out);
}

Dataset load_dataset(const fs::path& dir) {
  Dataset ds;
  ds.classes = load_class_set(dir / "classes.txt");
  const fs::path clouds_dir = dir / "clouds";
  if (!fs::is_directory(clouds_dir)) {
    throw FormatError("missing clouds/ directory under " + dir.string());
  }
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(clouds_dir)) {
    if (entry.path().extension() == ".bin") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  for (const std::string& id : ids) {
    Scene scene;
    scene.id = id;
    scene.cloud = load_point_cloud(clouds_dir / (id + ".bin"));
    scene.labels = load_labels(dir / "labels" / (id + ".txt"), ds.classes);
    ds.scenes.push_back(std::move(scene));
  }
  return ds;
}

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir / "clouds");
  fs::create_directories(dir / "labels");
  save_class_set(dataset.classes, dir / "classes.txt");
  for (const Scene& scene : dataset.scenes) {
    save_point_cloud(scene.cloud, dir / "clouds" / (scene.id + ".bin"));
    save_labels(scene.labels, dataset.classes, dir / "labels" / (scene.id + ".txt"));
  }
}

SyntheticSpec load_synthetic_spec(const fs::path& path) {
  const ConfigMap cfg = ConfigMap::parse_file(path);
  SyntheticSpec spec;
  spec.scene_count = cfg.get_u64("scene_count", spec.scene_count);
  spec.extent = cfg.get_double("extent", spec.extent);
  spec.clutter_points = cfg.get_u64("clutter_points", spec.clutter_points);
  spec.clump_min = static_cast<int>(cfg.get_u64("clump_min", static_cast<uint64_t>(spec.clump_min)));
  spec.clump_max = static_cast<int>(cfg.get_u64("clump_max", static_cast<uint64_t>(spec.clump_max)));
  spec.dim_jitter = cfg.get_double("dim_jitter", spec.dim_jitter);
  spec.points_per_m2 = cfg.get_double("points_per_m2", spec.points_per_m2);
  spec.min_object_points = cfg.get_u64("min_object_points", spec.min_object_points);
  spec.max_place_retries =
      static_cast<int>(cfg.get_u64("max_place_retries", static_cast<uint64_t>(spec.max_place_retries)));

  for (const std::string& line : cfg.get_all("class")) {
    std::istringstream in(line);
    ClassGenSpec c;
    if (!(in >> c.name >> c.length >> c.width >> c.height >> c.min_count >> c.max_count)) {
      throw FormatError(path.string() + ": class line '" + line +
                        "' expects: name length width height min_count max_count");
    }
    std::string extra;
    if (in >> extra) {
      throw FormatError(path.string() + ": class line '" + line + "' has trailing fields");
    }
    spec.classes.push_back(std::move(c));
  }
  cfg.finish();
  if (spec.classes.empty()) throw FormatError(path.string() + ": no class lines");
  if (spec.scene_count == 0) throw FormatError(path.string() + ": scene_count must be > 0");
  return spec;
}

namespace {

// Overlap test with a clearance margin so generated structures stay apart in
// the BEV grid used downstream.
bool footprint_clear(const Box3D& candidate, std::span<const Box3D> placed,
                     double margin) {
  Box3D inflated = candidate;
  inflated.length += margin;
  inflated.width += margin;
  for (const Box3D& other : placed) {
    if (bev_intersection_area(inflated, other) > 0.0) return false;
  }
  return true;
}

void append_object_points(PointCloud& cloud, const Box3D& box, size_t count, Rng& rng) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  for (size_t i = 0; i < count; ++i) {
    const double lx = rng.uniform(-0.5, 0.5) * box.length;
    const double ly = rng.uniform(-0.5, 0.5) * box.width;
    const double lz = rng.uniform(-0.5, 0.5) * box.height;
    Point p;
    p.x = static_cast<float>(box.center[0] + c * lx - s * ly);
    p.y = static_cast<float>(box.center[1] + s * lx + c * ly);
    p.z = static_cast<float>(box.center[2] + lz);
    p.intensity = static_cast<float>(rng.uniform(0.3, 0.8));
    cloud.push_back(p);
  }
}

}  // namespace

Dataset generate_synthetic_dataset(const SyntheticSpec& spec, uint64_t seed) {
  if (spec.classes.empty()) throw FormatError("synthetic spec has no classes");
  std::vector<std::string> names;
  for (const auto& c : spec.classes) names.push_back(c.name);

  Dataset ds;
  ds.classes = ClassSet(std::move(names));

  for (size_t scene_idx = 0; scene_idx < spec.scene_count; ++scene_idx) {
    Rng rng(mix_seed({seed, scene_idx}));
    Scene scene;
    {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "s%llu_%05zu",
                    static_cast<unsigned long long>(seed), scene_idx);
      scene.id = buf;
    }

    std::vector<Box3D> placed;

    // Labeled objects, class by class.
    for (size_t class_id = 0; class_id < spec.classes.size(); ++class_id) {
      const ClassGenSpec& cs = spec.classes[class_id];
      const int span = cs.max_count - cs.min_count;
      const int count =
          cs.min_count + (span > 0 ? static_cast<int>(rng.uniform_index(span + 1)) : 0);
      for (int k = 0; k < count; ++k) {
        bool ok = false;
        for (int attempt = 0; attempt < spec.max_place_retries; ++attempt) {
          const double jl = cs.length * (1.0 + rng.uniform(-spec.dim_jitter, spec.dim_jitter));
          const double jw = cs.width * (1.0 + rng.uniform(-spec.dim_jitter, spec.dim_jitter));
          const double jh = cs.height * (1.0 + rng.uniform(-spec.dim_jitter, spec.dim_jitter));
          const double reach = 0.5 * std::max(jl, jw) + 0.5;
          const double lim = 0.5 * spec.extent - reach;
          if (lim <= 0.0) break;
          const Box3D box = make_box(rng.uniform(-lim, lim), rng.uniform(-lim, lim),
                                     0.5 * jh, jl, jw, jh, rng.uniform(-3.14159265358979, 3.14159265358979));
          if (!footprint_clear(box, placed, 0.7)) continue;
          placed.push_back(box);
          scene.labels.push_back(ObjectLabel{box, static_cast<int>(class_id)});
          const size_t pts = std::max(
              spec.min_object_points,
              static_cast<size_t>(std::llround(spec.points_per_m2 * jl * jw)));
          append_object_points(scene.cloud, box, pts, rng);
          ok = true;
          break;
        }
        if (!ok) {
          throw std::runtime_error("synthetic generation infeasible: cannot place '" +
                                   cs.name + "' in scene " + scene.id);
        }
      }
    }

    // Bush-like clumps: unlabeled, object-scale structures that the detector
    // must learn to reject.
    const int clump_span = spec.clump_max - spec.clump_min;
    const int clumps =
        spec.clump_min +
        (clump_span > 0 ? static_cast<int>(rng.uniform_index(clump_span + 1)) : 0);
    for (int k = 0; k < clumps; ++k) {
      for (int attempt = 0; attempt < spec.max_place_retries; ++attempt) {
        const double radius = rng.uniform(0.35, 1.1);
        const double chgt = rng.uniform(0.35, 1.6);
        const double lim = 0.5 * spec.extent - radius - 0.5;
        const Box3D bound = make_box(rng.uniform(-lim, lim), rng.uniform(-lim, lim),
                                     0.5 * chgt, 2.0 * radius, 2.0 * radius, chgt, 0.0);
        if (!footprint_clear(bound, placed, 0.7)) continue;
        placed.push_back(bound);
        const double area = 3.14159265358979 * radius * radius;
        const size_t pts =
            std::max<size_t>(6, static_cast<size_t>(std::llround(rng.uniform(8.0, 20.0) * area)));
        for (size_t i = 0; i < pts; ++i) {
          const double ang = rng.uniform(0.0, 2.0 * 3.14159265358979);
          const double rad = radius * std::sqrt(rng.uniform());
          const double u = rng.uniform();
          Point p;
          p.x = static_cast<float>(bound.center[0] + rad * std::cos(ang));
          p.y = static_cast<float>(bound.center[1] + rad * std::sin(ang));
          p.z = static_cast<float>(chgt * u * u);  // bottom-heavy
          p.intensity = static_cast<float>(rng.uniform(0.2, 0.6));
          scene.cloud.push_back(p);
        }
        break;
      }
    }

    // Sparse ground clutter.
    for (size_t i = 0; i < spec.clutter_points; ++i) {
      Point p;
      p.x = static_cast<float>(rng.uniform(-0.5 * spec.extent, 0.5 * spec.extent));
      p.y = static_cast<float>(rng.uniform(-0.5 * spec.extent, 0.5 * spec.extent));
      p.z = static_cast<float>(rng.uniform(0.0, 0.06));
      p.intensity = static_cast<float>(rng.uniform(0.05, 0.3));
      scene.cloud.push_back(p);
    }

    ds.scenes.push_back(std::move(scene));
  }
  return ds;
}

}  // namespace fpsam
