#include "dvm/geometry.h"

#include <limits>

namespace dvm {

Vec3 optic_centre(const CameraPose& pose) {
  return -(pose.rotation.transpose() * pose.translation);
}

Projection project(const Vec3& p, const CameraPose& pose, const CameraIntrinsics& k) {
  const Vec3 cam = pose.rotation * p + pose.translation;
  if (std::abs(cam.z()) < 1e-12 && cam.head<2>().norm() < 1e-12) {
    throw PointAtOpticCentre();
  }
  const double sign = cam.z() >= 0 ? 1.0 : -1.0;
  Projection out;
  out.pixel = Vec2(k.fx * cam.x() / cam.z() + k.cx, k.fy * cam.y() / cam.z() + k.cy);
  out.depth = sign * cam.norm();
  return out;
}

Vec3 pixel_ray_direction(const Vec2& pixel, const CameraPose& pose, const CameraIntrinsics& k) {
  const Vec3 dir_cam((pixel.x() - k.cx) / k.fx, (pixel.y() - k.cy) / k.fy, 1.0);
  return (pose.rotation.transpose() * dir_cam).normalized();
}

Vec3 unproject(const Vec2& pixel, double depth, const CameraPose& pose,
               const CameraIntrinsics& k) {
  if (!(depth > 0)) {
    throw NonPositiveDepth();
  }
  return optic_centre(pose) + depth * pixel_ray_direction(pixel, pose, k);
}

std::vector<int> fps_select(const std::vector<Vec3>& positions, int n, int seed_index) {
  const int count = static_cast<int>(positions.size());
  if (n < 1 || n > count) {
    throw InvalidCount("fps_select: n must be in [1, |positions|]");
  }
  if (seed_index < 0 || seed_index >= count) {
    throw InvalidCount("fps_select: seed_index out of range");
  }

  std::vector<int> selected;
  selected.reserve(n);
  selected.push_back(seed_index);

  std::vector<char> taken(count, 0);
  taken[seed_index] = 1;
  std::vector<double> min_dist(count, std::numeric_limits<double>::infinity());
  int last = seed_index;
  while (static_cast<int>(selected.size()) < n) {
    int best = -1;
    double best_dist = -1.0;
    for (int i = 0; i < count; ++i) {
      if (taken[i]) continue;
      const double d = (positions[i] - positions[last]).squaredNorm();
      if (d < min_dist[i]) min_dist[i] = d;
      if (min_dist[i] > best_dist) {  // ties resolve to the lowest index
        best_dist = min_dist[i];
        best = i;
      }
    }
    selected.push_back(best);
    taken[best] = 1;
    last = best;
  }
  return selected;
}

}  // namespace dvm
