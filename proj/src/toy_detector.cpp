#include "fpsam/toy_detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "fpsam/errors.hpp"
#include "fpsam/io_util.hpp"

namespace fpsam {

namespace {

constexpr double kMinProposalDim = 0.1;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// log(1 + e^z) without overflow; BCE = stable_bce(z, y).
double stable_bce(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::fabs(z)));
}

struct CropStats {
  size_t count = 0;
  double z_min = 0.0;
  double z_max = 0.0;
  double z_sum = 0.0;
  double intensity_sum = 0.0;
};

CropStats crop_stats(const PointCloud& cloud, std::span<const size_t> indices) {
  CropStats s;
  for (size_t idx : indices) {
    const Point& p = cloud[idx];
    const double z = p.z;
    if (s.count == 0) {
      s.z_min = s.z_max = z;
    } else {
      s.z_min = std::min(s.z_min, z);
      s.z_max = std::max(s.z_max, z);
    }
    s.z_sum += z;
    s.intensity_sum += p.intensity;
    ++s.count;
  }
  return s;
}

FeatureVector features_from_stats(const CropStats& s, const Box3D& box) {
  FeatureVector f{};
  if (s.count == 0) return f;
  const double n = static_cast<double>(s.count);
  f[0] = std::log1p(n);
  f[1] = box.length * box.width;
  f[2] = s.z_max - s.z_min;
  f[3] = s.intensity_sum / n;
  f[4] = std::log1p(n / (box.length * box.width * box.height));
  f[5] = s.z_sum / n - box.center[2];
  return f;
}

FeatureVector scaled(const FeatureVector& f, const ToyModelParams& params) {
  FeatureVector out;
  for (size_t i = 0; i < kFeatureDim; ++i) out[i] = f[i] * params.feature_scale[i];
  return out;
}

double class_logit(const ClassWeights& cw, const FeatureVector& f) {
  double z = cw.bias;
  for (size_t i = 0; i < kFeatureDim; ++i) z += cw.w[i] * f[i];
  return z;
}

// Proposal features come from the component's own points; the component
// box is their tight extent, so this avoids re-cropping the full cloud.
FeatureVector proposal_features(const PointCloud& cloud, const Proposal& prop,
                                const ToyModelParams& params) {
  return scaled(features_from_stats(crop_stats(cloud, prop.member_points), prop.box),
                params);
}

struct TrainingProblem {
  std::vector<FeatureVector> features;        // scaled
  std::vector<std::vector<char>> targets;     // [proposal][class]
};

TrainingProblem build_training_problem(const ToyModelParams& params,
                                       const PointCloud& cloud,
                                       std::span<const ObjectLabel> labels) {
  TrainingProblem prob;
  const size_t num_classes = params.per_class.size();
  const std::vector<Proposal> proposals = generate_proposals(cloud, params.grid_cell);
  prob.features.reserve(proposals.size());
  prob.targets.reserve(proposals.size());
  for (const Proposal& prop : proposals) {
    prob.features.push_back(proposal_features(cloud, prop, params));
    std::vector<char> target(num_classes, 0);
    for (const ObjectLabel& label : labels) {
      if (target[static_cast<size_t>(label.class_id)]) continue;
      if (iou_3d(prop.box, label.box) >= params.match_threshold) {
        target[static_cast<size_t>(label.class_id)] = 1;
      }
    }
    prob.targets.push_back(std::move(target));
  }
  return prob;
}

double problem_loss(const ToyModelParams& params, const TrainingProblem& prob) {
  const size_t n = prob.features.size();
  const size_t num_classes = params.per_class.size();
  if (n == 0 || num_classes == 0) return 0.0;
  double loss = 0.0;
  for (size_t p = 0; p < n; ++p) {
    for (size_t c = 0; c < num_classes; ++c) {
      const double z = class_logit(params.per_class[c], prob.features[p]);
      const double w = prob.targets[p][c] ? params.positive_weight : 1.0;
      loss += w * stable_bce(z, prob.targets[p][c]);
    }
  }
  return loss / (static_cast<double>(n) * static_cast<double>(num_classes));
}

std::vector<ClassWeights> problem_gradient(const ToyModelParams& params,
                                           const TrainingProblem& prob) {
  const size_t n = prob.features.size();
  const size_t num_classes = params.per_class.size();
  std::vector<ClassWeights> grad(num_classes);
  if (n == 0) return grad;
  const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(num_classes));
  for (size_t p = 0; p < n; ++p) {
    for (size_t c = 0; c < num_classes; ++c) {
      const double z = class_logit(params.per_class[c], prob.features[p]);
      const double w = prob.targets[p][c] ? params.positive_weight : 1.0;
      const double delta = w * (sigmoid(z) - prob.targets[p][c]) * norm;
      for (size_t i = 0; i < kFeatureDim; ++i) {
        grad[c].w[i] += delta * prob.features[p][i];
      }
      grad[c].bias += delta;
    }
  }
  return grad;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ToyModelParams init_toy_params(size_t num_classes) {
  ToyModelParams params;
  params.per_class.assign(num_classes, ClassWeights{});
  return params;
}

std::vector<Proposal> generate_proposals(const PointCloud& cloud, double grid_cell) {
  if (grid_cell <= 0.0) throw std::invalid_argument("grid_cell must be positive");
  if (cloud.empty()) return {};

  // Occupied cells in deterministic (ix, iy) order, with their point lists.
  std::map<std::pair<int64_t, int64_t>, std::vector<size_t>> cells;
  for (size_t i = 0; i < cloud.size(); ++i) {
    const auto ix = static_cast<int64_t>(std::floor(cloud[i].x / grid_cell));
    const auto iy = static_cast<int64_t>(std::floor(cloud[i].y / grid_cell));
    cells[{ix, iy}].push_back(i);
  }

  // 4-connected flood fill over occupied cells.
  std::map<std::pair<int64_t, int64_t>, int> component_of;
  int next_component = 0;
  for (const auto& [key, pts] : cells) {
    if (component_of.count(key)) continue;
    const int comp = next_component++;
    std::vector<std::pair<int64_t, int64_t>> stack{key};
    component_of[key] = comp;
    while (!stack.empty()) {
      const auto [cx, cy] = stack.back();
      stack.pop_back();
      const std::pair<int64_t, int64_t> neighbors[4] = {
          {cx - 1, cy}, {cx + 1, cy}, {cx, cy - 1}, {cx, cy + 1}};
      for (const auto& nb : neighbors) {
        if (!cells.count(nb) || component_of.count(nb)) continue;
        component_of[nb] = comp;
        stack.push_back(nb);
      }
    }
  }

  std::vector<Proposal> proposals(static_cast<size_t>(next_component));
  for (auto& [key, pts] : cells) {
    auto& prop = proposals[static_cast<size_t>(component_of[key])];
    prop.member_points.insert(prop.member_points.end(), pts.begin(), pts.end());
  }

  for (int comp = 0; comp < next_component; ++comp) {
    Proposal& prop = proposals[static_cast<size_t>(comp)];
    prop.cluster_id = comp;
    std::sort(prop.member_points.begin(), prop.member_points.end());
    double x0 = 0, x1 = 0, y0 = 0, y1 = 0, z0 = 0, z1 = 0;
    bool first = true;
    for (size_t idx : prop.member_points) {
      const Point& p = cloud[idx];
      if (first) {
        x0 = x1 = p.x;
        y0 = y1 = p.y;
        z0 = z1 = p.z;
        first = false;
      } else {
        x0 = std::min<double>(x0, p.x);
        x1 = std::max<double>(x1, p.x);
        y0 = std::min<double>(y0, p.y);
        y1 = std::max<double>(y1, p.y);
        z0 = std::min<double>(z0, p.z);
        z1 = std::max<double>(z1, p.z);
      }
    }
    prop.box = make_box(0.5 * (x0 + x1), 0.5 * (y0 + y1), 0.5 * (z0 + z1),
                        std::max(x1 - x0, kMinProposalDim),
                        std::max(y1 - y0, kMinProposalDim),
                        std::max(z1 - z0, kMinProposalDim), 0.0);
  }
  return proposals;
}

FeatureVector extract_features(const PointCloud& cloud, const Box3D& box) {
  const std::vector<size_t> inside = points_in_box(cloud, box);
  return features_from_stats(crop_stats(cloud, inside), box);
}

std::vector<Prediction> detect(const ToyModelParams& params, const PointCloud& cloud) {
  std::vector<Prediction> preds;
  const size_t num_classes = params.per_class.size();
  if (num_classes == 0) return preds;
  for (const Proposal& prop : generate_proposals(cloud, params.grid_cell)) {
    const FeatureVector f = proposal_features(cloud, prop, params);
    int best_class = 0;
    double best_score = -1.0;
    for (size_t c = 0; c < num_classes; ++c) {
      const double score = sigmoid(class_logit(params.per_class[c], f));
      if (score > best_score) {
        best_score = score;
        best_class = static_cast<int>(c);
      }
    }
    if (best_score >= params.emit_threshold) {
      preds.push_back(Prediction{prop.box, best_class, best_score});
    }
  }
  return preds;
}

double training_loss(const ToyModelParams& params, const PointCloud& cloud,
                     std::span<const ObjectLabel> labels) {
  return problem_loss(params, build_training_problem(params, cloud, labels));
}

std::vector<ClassWeights> training_gradient(const ToyModelParams& params,
                                            const PointCloud& cloud,
                                            std::span<const ObjectLabel> labels) {
  return problem_gradient(params, build_training_problem(params, cloud, labels));
}

TrainStepResult train_step(const ToyModelParams& params, const PointCloud& cloud,
                           std::span<const ObjectLabel> labels) {
  TrainStepResult result;
  result.params = params;
  const TrainingProblem prob = build_training_problem(params, cloud, labels);
  if (prob.features.empty()) {
    result.loss = 0.0;
    return result;
  }
  result.loss = problem_loss(params, prob);
  const std::vector<ClassWeights> grad = problem_gradient(params, prob);
  for (size_t c = 0; c < grad.size(); ++c) {
    for (size_t i = 0; i < kFeatureDim; ++i) {
      result.params.per_class[c].w[i] -= params.learning_rate * grad[c].w[i];
    }
    result.params.per_class[c].bias -= params.learning_rate * grad[c].bias;
  }
  return result;
}

void save_checkpoint(const ToyModelParams& params, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "fpsam_toy_detector v1\n";
  out << "classes " << params.per_class.size() << "\n";
  out << "features " << kFeatureDim << "\n";
  out << "grid_cell " << format_double(params.grid_cell) << "\n";
  out << "learning_rate " << format_double(params.learning_rate) << "\n";
  out << "emit_threshold " << format_double(params.emit_threshold) << "\n";
  out << "match_threshold " << format_double(params.match_threshold) << "\n";
  out << "positive_weight " << format_double(params.positive_weight) << "\n";
  out << "feature_scale";
  for (double s : params.feature_scale) out << " " << format_double(s);
  out << "\n";
  for (size_t c = 0; c < params.per_class.size(); ++c) {
    out << "class " << c;
    for (double w : params.per_class[c].w) out << " " << format_double(w);
    out << " " << format_double(params.per_class[c].bias) << "\n";
  }
  write_file_atomic(path, out.str());
}

ToyModelParams load_checkpoint(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  auto next_line = [&](const char* what) {
    if (!std::getline(in, line)) {
      throw FormatError(path.string() + ": truncated checkpoint, missing " +
                        std::string(what));
    }
    return line;
  };
  if (next_line("magic") != "fpsam_toy_detector v1") {
    throw FormatError(path.string() + ": bad magic line");
  }

  auto parse_kv = [&](const std::string& key, auto& value) {
    next_line(key.c_str());
    std::istringstream ls(line);
    std::string k;
    if (!(ls >> k >> value) || k != key) {
      throw FormatError(path.string() + ": expected '" + key + " <value>', got '" +
                        line + "'");
    }
  };

  size_t classes = 0, features = 0;
  ToyModelParams params;
  parse_kv("classes", classes);
  parse_kv("features", features);
  if (features != kFeatureDim) {
    throw FormatError(path.string() + ": checkpoint has " + std::to_string(features) +
                      " features, expected " + std::to_string(kFeatureDim));
  }
  parse_kv("grid_cell", params.grid_cell);
  parse_kv("learning_rate", params.learning_rate);
  parse_kv("emit_threshold", params.emit_threshold);
  parse_kv("match_threshold", params.match_threshold);
  parse_kv("positive_weight", params.positive_weight);

  {
    next_line("feature_scale");
    std::istringstream ls(line);
    std::string k;
    if (!(ls >> k) || k != "feature_scale") {
      throw FormatError(path.string() + ": expected feature_scale line");
    }
    for (size_t i = 0; i < kFeatureDim; ++i) {
      if (!(ls >> params.feature_scale[i])) {
        throw FormatError(path.string() + ": feature_scale needs " +
                          std::to_string(kFeatureDim) + " values");
      }
    }
  }

  params.per_class.resize(classes);
  for (size_t c = 0; c < classes; ++c) {
    next_line("class row");
    std::istringstream ls(line);
    std::string k;
    size_t idx = 0;
    if (!(ls >> k >> idx) || k != "class" || idx != c) {
      throw FormatError(path.string() + ": expected 'class " + std::to_string(c) +
                        " ...', got '" + line + "'");
    }
    for (size_t i = 0; i < kFeatureDim; ++i) {
      if (!(ls >> params.per_class[c].w[i])) {
        throw FormatError(path.string() + ": class " + std::to_string(c) +
                          " row is short");
      }
    }
    if (!(ls >> params.per_class[c].bias)) {
      throw FormatError(path.string() + ": class " + std::to_string(c) +
                        " row is missing the bias");
    }
  }
  return params;
}

}  // namespace fpsam
