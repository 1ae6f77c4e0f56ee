#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "dvm/geometry.h"
#include "dvm/image.h"
#include "dvm/rectify.h"
#include "dvm/rng.h"

namespace dvm {

struct NotRectified : std::runtime_error {
  NotRectified() : std::runtime_error("poses do not share the rectified rotation") {}
};

struct ColoredPointCloud {
  std::vector<Vec3> points;
  std::vector<std::array<float, 3>> colors;
  std::vector<int32_t> source_pixels;  // linear index in the birth raster

  size_t size() const { return points.size(); }
};

struct MorphResult {
  Image image;
  Mask valid;
  DepthMap depth;
  CameraPose pose;           // interpolated rectified pose
  CameraIntrinsics k_tilde;  // shared intrinsics of the pair
  double alpha = 0.0;
};

struct PairFilterConfig {
  double gamma = 6.0;  // max distance between optic centres
};

enum class PairReason { Valid, TooFar, Singular };

struct PairValidity {
  bool valid = false;
  PairReason reason = PairReason::Valid;
};

const char* pair_reason_name(PairReason reason);

// Linear interpolation of the optic centre between two rectified poses; the
// shared rotation is kept. alpha=0 returns pose_k, alpha=1 returns pose_k2.
CameraPose interpolate_pose(const CameraPose& pose_k, const CameraPose& pose_k2, double alpha,
                            double rotation_tol = 1e-9);

// One point per jointly valid pixel: color from the raster, position from the
// coordinate map.
ColoredPointCloud to_point_cloud(const Image& image, const Mask& image_valid,
                                 const CoordMap3D& coords);

// Projects both clouds into the camera (k_tilde, pose_alpha). Points behind
// the camera or out of bounds are dropped; per pixel the point nearest to the
// optic centre wins (ties: lower source index, cloud k before k'). Pixels that
// receive no point carry the background color and a cleared mask bit. At the
// exact endpoints (alpha 0 or 1) only the matching cloud is projected, since
// the endpoint view is the rectified view itself.
MorphResult fuse_project(const ColoredPointCloud& cloud_k, const ColoredPointCloud& cloud_k2,
                         const CameraPose& pose_alpha, const CameraIntrinsics& k_tilde,
                         double alpha = 0.0,
                         const std::array<float, 3>& background = {1.f, 1.f, 1.f});

// Draw alpha ~ N(0.5, sigma) restricted to (0,1): up to 16 rejection redraws,
// then a clamp to [0.05, 0.95].
double sample_alpha(Rng& rng, double sigma);

// A pair is usable when the centres are within gamma of each other and
// neither optic centre falls inside the other camera's field of view.
PairValidity pair_valid(const CameraPose& pose_k, const CameraPose& pose_k2,
                        const CameraIntrinsics& k_k, const CameraIntrinsics& k_k2,
                        const PairFilterConfig& cfg);

}  // namespace dvm
