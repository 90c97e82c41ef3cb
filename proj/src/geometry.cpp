#include "fpsam/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace fpsam {

namespace {

// Intersection areas below this (m^2) collapse to exactly 0 so that
// edge-touching and sliver polygons from collinear corners do not leak.
constexpr double kDegenerateArea = 1e-12;

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double shoelace_area(std::span<const Vec2> poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    acc += p.x * q.y - q.x * p.y;
  }
  return std::fabs(acc) * 0.5;
}

// Clips a convex CCW polygon against the half-plane left of edge (a, b).
// Points on the edge count as inside.
void clip_against_edge(const Vec2& a, const Vec2& b, std::vector<Vec2>& poly,
                       std::vector<Vec2>& scratch) {
  scratch.clear();
  const size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    const Vec2& cur = poly[i];
    const Vec2& nxt = poly[(i + 1) % n];
    const double dc = cross(a, b, cur);
    const double dn = cross(a, b, nxt);
    const bool cur_in = dc >= 0.0;
    const bool nxt_in = dn >= 0.0;
    if (cur_in) scratch.push_back(cur);
    if (cur_in != nxt_in) {
      const double t = dc / (dc - dn);
      scratch.push_back({cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
    }
  }
  poly.swap(scratch);
}

// Footprint area from the same corner values the clipper sees, so that
// self-intersection reproduces the footprint area bit for bit.
double footprint_area(const Box3D& box) {
  const auto corners = bev_corners(box);
  return shoelace_area(corners);
}

auto box_key(const Box3D& b) {
  return std::tie(b.center[0], b.center[1], b.center[2], b.length, b.width,
                  b.height, b.yaw);
}

}  // namespace

double normalize_yaw(double yaw) {
  constexpr double kPi = 3.141592653589793238462643383279502884;
  double y = std::fmod(yaw + kPi, 2.0 * kPi);
  if (y < 0.0) y += 2.0 * kPi;
  return y - kPi;
}

Box3D make_box(double cx, double cy, double cz, double length, double width,
               double height, double yaw) {
  return Box3D{{cx, cy, cz}, length, width, height, normalize_yaw(yaw)};
}

bool box_is_valid(const Box3D& box) {
  constexpr double kPi = 3.141592653589793238462643383279502884;
  for (double c : box.center) {
    if (!std::isfinite(c)) return false;
  }
  return std::isfinite(box.yaw) && box.yaw >= -kPi && box.yaw < kPi &&
         box.length > 0.0 && box.width > 0.0 && box.height > 0.0;
}

std::array<Vec2, 4> bev_corners(const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = 0.5 * box.length;
  const double hw = 0.5 * box.width;
  // Local corners in CCW order, rotated into the sensor frame.
  const std::array<Vec2, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  std::array<Vec2, 4> out;
  for (size_t i = 0; i < 4; ++i) {
    out[i].x = box.center[0] + c * local[i].x - s * local[i].y;
    out[i].y = box.center[1] + s * local[i].x + c * local[i].y;
  }
  return out;
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  // Canonical argument order makes the result exactly symmetric.
  const bool a_first = box_key(a) <= box_key(b);
  const Box3D& first = a_first ? a : b;
  const Box3D& second = a_first ? b : a;

  const auto subject = bev_corners(first);
  const auto clip = bev_corners(second);

  std::vector<Vec2> poly(subject.begin(), subject.end());
  std::vector<Vec2> scratch;
  scratch.reserve(8);
  poly.reserve(8);
  for (size_t i = 0; i < 4 && !poly.empty(); ++i) {
    clip_against_edge(clip[i], clip[(i + 1) % 4], poly, scratch);
  }

  double area = shoelace_area(poly);
  if (area < kDegenerateArea) return 0.0;
  // The intersection is contained in both footprints.
  area = std::min(area, std::min(footprint_area(first), footprint_area(second)));
  return area;
}

double iou_3d(const Box3D& a, const Box3D& b) {
  const double za0 = a.center[2] - 0.5 * a.height;
  const double za1 = a.center[2] + 0.5 * a.height;
  const double zb0 = b.center[2] - 0.5 * b.height;
  const double zb1 = b.center[2] + 0.5 * b.height;
  const double dz = std::min(za1, zb1) - std::max(za0, zb0);
  if (dz <= 0.0) return 0.0;

  const double inter_area = bev_intersection_area(a, b);
  if (inter_area == 0.0) return 0.0;

  const double inter_vol = inter_area * dz;
  const double vol_a = footprint_area(a) * a.height;
  const double vol_b = footprint_area(b) * b.height;
  const double union_vol = vol_a + vol_b - inter_vol;
  return inter_vol / union_vol;
}

double max_iou_with_gt(const Box3D& pred, std::span<const Box3D> gt_boxes) {
  double best = 0.0;
  for (const Box3D& gt : gt_boxes) {
    best = std::max(best, iou_3d(pred, gt));
  }
  return best;
}

std::vector<size_t> points_in_box(const PointCloud& points, const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = 0.5 * box.length;
  const double hw = 0.5 * box.width;
  const double hh = 0.5 * box.height;

  std::vector<size_t> inside;
  for (size_t i = 0; i < points.size(); ++i) {
    const double dx = static_cast<double>(points[i].x) - box.center[0];
    const double dy = static_cast<double>(points[i].y) - box.center[1];
    const double dz = static_cast<double>(points[i].z) - box.center[2];
    const double lx = c * dx + s * dy;
    const double ly = -s * dx + c * dy;
    if (std::fabs(lx) <= hl && std::fabs(ly) <= hw && std::fabs(dz) <= hh) {
      inside.push_back(i);
    }
  }
  return inside;
}

}  // namespace fpsam
