#pragma once

#include <vector>

namespace fpsam {

// One LiDAR return. Matches the on-disk record layout (four 32-bit floats).
struct Point {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  float intensity = 0.0f;
};

using PointCloud = std::vector<Point>;

}  // namespace fpsam
