#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "fpsam/point_cloud.hpp"

namespace fpsam {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Oriented 3D box in the sensor frame. Length runs along the heading given by
// yaw (rotation about the vertical axis), width across it, height vertical.
// Valid boxes have positive dims and yaw in [-pi, pi).
struct Box3D {
  std::array<double, 3> center{0.0, 0.0, 0.0};
  double length = 0.0;
  double width = 0.0;
  double height = 0.0;
  double yaw = 0.0;
};

// Wraps an angle into [-pi, pi).
double normalize_yaw(double yaw);

// Builds a box with the yaw normalized.
Box3D make_box(double cx, double cy, double cz, double length, double width,
               double height, double yaw);

bool box_is_valid(const Box3D& box);

// Four corners of the footprint in the ground plane, counter-clockwise.
std::array<Vec2, 4> bev_corners(const Box3D& box);

// Area of the intersection of the two footprint polygons (convex clipping).
// Exactly 0 for disjoint or edge-touching footprints; symmetric in arguments.
double bev_intersection_area(const Box3D& a, const Box3D& b);

// volume(intersection) / volume(union). 0 when footprints or vertical ranges
// are disjoint, 1 for identical boxes.
double iou_3d(const Box3D& a, const Box3D& b);

// Max of iou_3d(pred, g) over gt_boxes; 0 for an empty list.
double max_iou_with_gt(const Box3D& pred, std::span<const Box3D> gt_boxes);

// Indices of points inside the box (boundary included), ascending.
std::vector<size_t> points_in_box(const PointCloud& points, const Box3D& box);

}  // namespace fpsam
