#pragma once

#include <Eigen/Geometry>

#include "dvm/data.h"
#include "dvm/rectify.h"
#include "test_support.h"

namespace dvm::testing {

// The four reference-camera placements relative to the second camera's frame:
// left, right, above, below.
inline CameraPose perturb_roll(const CameraPose& pose, double angle) {
  CameraPose out = pose;
  out.rotation = Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix() * pose.rotation;
  out.translation = -(out.rotation * optic_centre(pose));
  return out;
}

struct ConfiguredPair {
  CameraPose pose_k;
  CameraPose pose_k2;
};

inline ConfiguredPair make_configured_pair(Rng& rng, int placement) {
  const Vec3 target(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2));
  Vec3 dir(rng.gaussian(), rng.gaussian(), rng.gaussian());
  dir.normalize();
  if (std::abs(dir.z()) > 0.9) dir = Vec3(dir.x(), 0.9, dir.z() > 0 ? 0.4 : -0.4).normalized();

  const double dist = rng.uniform(3.0, 5.0);
  const Vec3 o_k2 = target + dist * dir;
  CameraPose pose_k2 = look_at_pose(o_k2, target);
  pose_k2 = perturb_roll(pose_k2, rng.uniform(-0.15, 0.15));

  Vec3 axis;
  switch (placement & 3) {
    case 0: axis = -pose_k2.axis_x(); break;  // reference on the left
    case 1: axis = pose_k2.axis_x(); break;   // reference on the right
    case 2: axis = -pose_k2.axis_y(); break;  // reference above (y points down)
    default: axis = pose_k2.axis_y(); break;  // reference below
  }
  const Vec3 jitter(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
  const Vec3 o_k = o_k2 + rng.uniform(0.8, 2.2) * axis + jitter;
  CameraPose pose_k = look_at_pose(o_k, target);
  pose_k = perturb_roll(pose_k, rng.uniform(-0.15, 0.15));
  return {pose_k, pose_k2};
}

struct EpipolarStats {
  int pairs = 0;
  int covisible = 0;
  int aligned = 0;           // off-baseline-axis delta < 0.5 px
  double max_delta = 0.0;
  bool centres_preserved = true;
  bool rotations_proper = true;
};

// Projects random scene points into both rectified cameras and measures the
// component of the pixel difference orthogonal to the rectified baseline axis
// (row difference for horizontal pairs, column difference for swapped ones).
inline EpipolarStats run_epipolar_harness(int n_pairs, int pts_per_pair, Rng& rng,
                                          bool recentre) {
  const CameraIntrinsics k = test_intrinsics(64, 64);
  EpipolarStats stats;
  for (int p = 0; p < n_pairs; ++p) {
    const ConfiguredPair pair = make_configured_pair(rng, p);
    WarpPair wp;
    try {
      wp = build_warp_pair(pair.pose_k, pair.pose_k2, k, k, recentre);
    } catch (const std::exception&) {
      continue;  // degenerate draw; does not count as a pair
    }
    ++stats.pairs;

    stats.centres_preserved =
        stats.centres_preserved &&
        (optic_centre(wp.pose_k) - optic_centre(pair.pose_k)).norm() < 1e-9 &&
        (optic_centre(wp.pose_k2) - optic_centre(pair.pose_k2)).norm() < 1e-9;
    const Mat3 r = wp.basis.rotation();
    stats.rotations_proper =
        stats.rotations_proper &&
        (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9 &&
        std::abs(r.determinant() - 1.0) < 1e-9;

    for (int i = 0; i < pts_per_pair; ++i) {
      const Vec3 point(0.6 * rng.gaussian(), 0.6 * rng.gaussian(), 0.6 * rng.gaussian());
      Projection a, b;
      try {
        a = project(point, wp.pose_k, wp.k_tilde);
        b = project(point, wp.pose_k2, wp.k_tilde);
      } catch (const PointAtOpticCentre&) {
        continue;
      }
      const auto inside = [&](const Projection& pr) {
        return pr.depth > 0 && pr.pixel.x() >= 0 && pr.pixel.x() <= wp.k_tilde.width - 1 &&
               pr.pixel.y() >= 0 && pr.pixel.y() <= wp.k_tilde.height - 1;
      };
      if (!inside(a) || !inside(b)) continue;
      ++stats.covisible;
      const double delta = wp.basis.swap_applied ? std::abs(a.pixel.x() - b.pixel.x())
                                                 : std::abs(a.pixel.y() - b.pixel.y());
      stats.max_delta = std::max(stats.max_delta, delta);
      if (delta < 0.5) ++stats.aligned;
    }
  }
  return stats;
}

}  // namespace dvm::testing
