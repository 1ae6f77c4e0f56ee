#pragma once

#include <utility>

#include "dvm/geometry.h"
#include "dvm/image.h"

namespace dvm {

struct CoincidentCentres : std::runtime_error {
  CoincidentCentres() : std::runtime_error("optic centres coincide; no baseline") {}
};
struct DegenerateBaseline : std::runtime_error {
  DegenerateBaseline() : std::runtime_error("baseline parallel to the viewing axis") {}
};
struct SingularIntrinsics : std::runtime_error {
  SingularIntrinsics() : std::runtime_error("intrinsic matrix is singular") {}
};
struct SingularWarp : std::runtime_error {
  SingularWarp() : std::runtime_error("warp homography is singular") {}
};
struct DimensionMismatch : std::runtime_error {
  explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

// Orthonormal rows of the shared rectifying rotation, plus the configuration
// flags that drove their construction.
struct RectifyingBasis {
  Vec3 v_x;
  Vec3 v_y;
  Vec3 v_z;
  bool swap_applied = false;  // vertical configuration: baseline maps to image y
  double sign_x = 1.0;
  double sign_y = 1.0;

  Mat3 rotation() const {
    Mat3 r;
    r.row(0) = v_x;
    r.row(1) = v_y;
    r.row(2) = v_z;
    return r;
  }
};

struct WarpPair {
  Mat3 warp_k;        // pixel(k) -> rectified pixel
  Mat3 warp_k2;       // pixel(k') -> rectified pixel
  CameraIntrinsics k_tilde;
  RectifyingBasis basis;
  CameraPose pose_k;   // rectified pose of camera k (same optic centre)
  CameraPose pose_k2;  // rectified pose of camera k'
};

// Grid of world points per pixel, invalid where no estimate exists.
struct CoordMap3D {
  int width = 0;
  int height = 0;
  std::vector<Vec3> points;
  Mask valid;

  CoordMap3D() = default;
  CoordMap3D(int w, int h)
      : width(w), height(h), points(size_t(w) * h, Vec3::Zero()), valid(w, h, 0) {}

  Vec3& at(int x, int y) { return points[size_t(y) * width + x]; }
  const Vec3& at(int x, int y) const { return points[size_t(y) * width + x]; }
};

struct RectifiedView {
  Image image;
  Mask image_valid;
  DepthMap depth;
  CoordMap3D coords;
};

struct RectifiedPair {
  RectifiedView view_k;
  RectifiedView view_k2;
  WarpPair warp;
};

// Baseline direction and the axis orthogonal to it and to camera k's viewing
// direction, both normalized. Throws CoincidentCentres / DegenerateBaseline.
std::pair<Vec3, Vec3> baseline_axes(const CameraPose& pose_k, const CameraPose& pose_k2);

struct VerticalDetection {
  double s = 0.0;  // 0 or 2
  bool swap = false;
};

// Probes the pair configuration with a1=(1,1,0), a2=(-1,1,0) expressed in
// camera k's frame; s != 0 flags a vertical configuration where the baseline
// swaps onto the image y axis.
VerticalDetection detect_vertical(const Vec3& v_x, const CameraPose& pose_k);

struct OrientedAxes {
  Vec3 v_x;
  Vec3 v_y;
  double sign_x = 1.0;
  double sign_y = 1.0;
};

// Sign-corrects the axes so camera k acts as the reference (left / top) view.
OrientedAxes orient_axes(const Vec3& v_x, const Vec3& v_y, const CameraPose& pose_k);

RectifyingBasis rectifying_basis(const CameraPose& pose_k, const CameraPose& pose_k2);

// Axis-aligned pixel region, used to describe where the content of interest
// lives in a source raster.
struct PixelBox {
  double lo_u = 0, lo_v = 0, hi_u = 0, hi_v = 0;
  bool empty = true;

  void grow(double u, double v) {
    if (empty) {
      lo_u = hi_u = u;
      lo_v = hi_v = v;
      empty = false;
      return;
    }
    lo_u = std::min(lo_u, u);
    hi_u = std::max(hi_u, u);
    lo_v = std::min(lo_v, v);
    hi_v = std::max(hi_v, v);
  }
};

// Builds the warp homographies and rectified poses. The shared intrinsics are
// the elementwise mean of the two inputs with raster size max(w) x max(h).
// When recentre is set the shared principal point is shifted so the union of
// the two warped footprints is centred in the output raster (the same shift
// applies to both warps, so epipolar alignment is unaffected). The footprints
// default to the full source frames; callers that know where the content
// lives (e.g. the object silhouette) can pass tighter boxes.
WarpPair build_warp_pair(const CameraPose& pose_k, const CameraPose& pose_k2,
                         const CameraIntrinsics& k_k, const CameraIntrinsics& k_k2,
                         bool recentre = false, const PixelBox* content_k = nullptr,
                         const PixelBox* content_k2 = nullptr);

// Inverse-mapped bilinear warp; pixels with no source preimage are masked out.
std::pair<Image, Mask> warp_image(const Image& img, const Mat3& warp, int out_width,
                                  int out_height);

enum class PairSide { k, k2 };

// Lifts the depth map to world coordinates through the original camera, then
// transfers each 3D point into the rectified raster (nearest integer pixel,
// nearest-to-centre wins on collisions). Output depths are distances from the
// preserved optic centre; no depth value is ever interpolated.
std::pair<DepthMap, CoordMap3D> warp_depth(const DepthMap& depth, const CameraPose& pose,
                                           const CameraIntrinsics& k, const WarpPair& wp,
                                           PairSide side);

// Full prewarp of a view pair: images (bilinear) and depths (exact points).
RectifiedPair rectify_pair(const Image& img_k, const DepthMap& depth_k, const CameraPose& pose_k,
                           const CameraIntrinsics& k_k, const Image& img_k2,
                           const DepthMap& depth_k2, const CameraPose& pose_k2,
                           const CameraIntrinsics& k_k2, bool recentre = true);

}  // namespace dvm
