#include "dvm/morph.h"

#include <algorithm>
#include <cmath>

namespace dvm {

const char* pair_reason_name(PairReason reason) {
  switch (reason) {
    case PairReason::Valid: return "Valid";
    case PairReason::TooFar: return "TooFar";
    case PairReason::Singular: return "Singular";
  }
  return "?";
}

CameraPose interpolate_pose(const CameraPose& pose_k, const CameraPose& pose_k2, double alpha,
                            double rotation_tol) {
  if ((pose_k.rotation - pose_k2.rotation).cwiseAbs().maxCoeff() > rotation_tol) {
    throw NotRectified();
  }
  if (alpha == 0.0) return pose_k;
  if (alpha == 1.0) return pose_k2;
  const Vec3 centre = (1.0 - alpha) * optic_centre(pose_k) + alpha * optic_centre(pose_k2);
  CameraPose out;
  out.rotation = pose_k.rotation;
  out.translation = -(out.rotation * centre);
  return out;
}

ColoredPointCloud to_point_cloud(const Image& image, const Mask& image_valid,
                                 const CoordMap3D& coords) {
  if (image.width != coords.width || image.height != coords.height ||
      image_valid.width != image.width || image_valid.height != image.height) {
    throw DimensionMismatch("point cloud rasters disagree in size");
  }
  ColoredPointCloud cloud;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      if (!image_valid.at(x, y) || !coords.valid.at(x, y)) continue;
      const float* p = image.at(x, y);
      cloud.points.push_back(coords.at(x, y));
      cloud.colors.push_back({p[0], p[1], p[2]});
      cloud.source_pixels.push_back(y * image.width + x);
    }
  }
  return cloud;
}

MorphResult fuse_project(const ColoredPointCloud& cloud_k, const ColoredPointCloud& cloud_k2,
                         const CameraPose& pose_alpha, const CameraIntrinsics& k_tilde,
                         double alpha, const std::array<float, 3>& background) {
  const int w = k_tilde.width;
  const int h = k_tilde.height;

  MorphResult out;
  out.image = Image(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.image.set(x, y, background[0], background[1], background[2]);
  }
  out.valid = Mask(w, h, 0);
  out.depth = DepthMap(w, h);
  out.pose = pose_alpha;
  out.k_tilde = k_tilde;
  out.alpha = alpha;

  // Winner bookkeeping so the outcome is independent of traversal order:
  // smallest (distance, cloud, source index) wins.
  struct Winner {
    double dist;
    int cloud;
    int32_t src;
  };
  std::vector<Winner> winners(size_t(w) * h, Winner{0.0, -1, 0});

  auto splat = [&](const ColoredPointCloud& cloud, int cloud_id) {
    for (size_t i = 0; i < cloud.size(); ++i) {
      const Vec3 cam = pose_alpha.rotation * cloud.points[i] + pose_alpha.translation;
      if (cam.z() <= 0) continue;  // behind the camera
      const double u = k_tilde.fx * cam.x() / cam.z() + k_tilde.cx;
      const double v = k_tilde.fy * cam.y() / cam.z() + k_tilde.cy;
      const int px = static_cast<int>(std::lround(u));
      const int py = static_cast<int>(std::lround(v));
      if (px < 0 || px >= w || py < 0 || py >= h) continue;
      const double dist = cam.norm();

      Winner& cur = winners[size_t(py) * w + px];
      const bool wins =
          cur.cloud < 0 || dist < cur.dist ||
          (dist == cur.dist &&
           (cloud_id < cur.cloud || (cloud_id == cur.cloud && cloud.source_pixels[i] < cur.src)));
      if (!wins) continue;
      cur = Winner{dist, cloud_id, cloud.source_pixels[i]};
      out.image.set(px, py, cloud.colors[i][0], cloud.colors[i][1], cloud.colors[i][2]);
      out.depth.at(px, py) = static_cast<float>(dist);
      out.depth.valid.at(px, py) = 1;
      out.valid.at(px, py) = 1;
    }
  };
  // At the exact endpoints the in-between view coincides with one of the two
  // rectified views (the endpoint warp is the identity map), so only the
  // matching cloud is projected; the other one could only occlude it with
  // resampled duplicates of the same surface.
  if (alpha != 1.0) splat(cloud_k, 0);
  if (alpha != 0.0) splat(cloud_k2, 1);
  return out;
}

double sample_alpha(Rng& rng, double sigma) {
  double alpha = 0.5;
  for (int attempt = 0; attempt < 16; ++attempt) {
    alpha = rng.gaussian(0.5, sigma);
    if (alpha > 0.0 && alpha < 1.0) return alpha;
  }
  return std::clamp(alpha, 0.05, 0.95);
}

PairValidity pair_valid(const CameraPose& pose_k, const CameraPose& pose_k2,
                        const CameraIntrinsics& k_k, const CameraIntrinsics& k_k2,
                        const PairFilterConfig& cfg) {
  const Vec3 o_k = optic_centre(pose_k);
  const Vec3 o_k2 = optic_centre(pose_k2);
  if ((o_k - o_k2).norm() > cfg.gamma) {
    return {false, PairReason::TooFar};
  }

  auto centre_in_view = [](const Vec3& centre, const CameraPose& pose,
                           const CameraIntrinsics& k) {
    try {
      const Projection p = project(centre, pose, k);
      return p.depth > 0 && p.pixel.x() >= 0 && p.pixel.x() <= k.width - 1 &&
             p.pixel.y() >= 0 && p.pixel.y() <= k.height - 1;
    } catch (const PointAtOpticCentre&) {
      return true;  // coincident centres are certainly singular
    }
  };
  if (centre_in_view(o_k2, pose_k, k_k) || centre_in_view(o_k, pose_k2, k_k2)) {
    return {false, PairReason::Singular};
  }
  return {true, PairReason::Valid};
}

}  // namespace dvm
