#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace dvm {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct PointAtOpticCentre : std::runtime_error {
  PointAtOpticCentre() : std::runtime_error("point coincides with the optic centre") {}
};
struct NonPositiveDepth : std::runtime_error {
  NonPositiveDepth() : std::runtime_error("depth must be positive") {}
};
struct InvalidCount : std::runtime_error {
  explicit InvalidCount(const std::string& what) : std::runtime_error(what) {}
};

// Pinhole intrinsics. Camera frame: x right, y down, z forward; integer pixel
// coordinates are pixel centres.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  Mat3 matrix() const {
    Mat3 k = Mat3::Identity();
    k(0, 0) = fx;
    k(1, 1) = fy;
    k(0, 2) = cx;
    k(1, 2) = cy;
    return k;
  }

  bool valid() const { return fx > 0 && fy > 0 && width >= 1 && height >= 1; }
};

// World-to-camera rigid transform: x_cam = rotation * x_world + translation.
struct CameraPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  // Camera axes expressed in world coordinates.
  Vec3 axis_x() const { return rotation.row(0); }
  Vec3 axis_y() const { return rotation.row(1); }
  Vec3 axis_z() const { return rotation.row(2); }

  bool is_rotation(double tol = 1e-9) const {
    return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(rotation.determinant() - 1.0) <= tol;
  }
};

struct CameraModel {
  CameraIntrinsics intrinsics;
  CameraPose pose;
};

// o = -R^T t, the centre of projection.
Vec3 optic_centre(const CameraPose& pose);

struct Projection {
  Vec2 pixel;
  double depth;  // signed distance from the optic centre; > 0 means in front
};

Projection project(const Vec3& p, const CameraPose& pose, const CameraIntrinsics& k);

// World point on the ray through `pixel` at Euclidean distance `depth` from
// the optic centre.
Vec3 unproject(const Vec2& pixel, double depth, const CameraPose& pose,
               const CameraIntrinsics& k);

// Unit world-space direction of the ray through `pixel`.
Vec3 pixel_ray_direction(const Vec2& pixel, const CameraPose& pose, const CameraIntrinsics& k);

// Greedy max-min selection over Euclidean distance, seeded at seed_index.
// Result has length n and starts with seed_index.
std::vector<int> fps_select(const std::vector<Vec3>& positions, int n, int seed_index);

}  // namespace dvm
