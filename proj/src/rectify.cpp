#include "dvm/rectify.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace dvm {
namespace {

constexpr double kSignEps = 1e-12;

// sgn with sgn(0) := +1 so the configuration probes stay total.
double sgn(double v) { return v < -kSignEps ? -1.0 : 1.0; }

Mat3 invert_or_throw(const Mat3& m, double min_det = 1e-12) {
  if (std::abs(m.determinant()) < min_det) throw SingularWarp();
  return m.inverse();
}

Vec2 apply_homography(const Mat3& h, const Vec2& px) {
  const Vec3 v = h * Vec3(px.x(), px.y(), 1.0);
  return Vec2(v.x() / v.z(), v.y() / v.z());
}

}  // namespace

std::pair<Vec3, Vec3> baseline_axes(const CameraPose& pose_k, const CameraPose& pose_k2) {
  const Vec3 o_k = optic_centre(pose_k);
  const Vec3 o_k2 = optic_centre(pose_k2);
  Vec3 v_x = o_k - o_k2;
  if (v_x.norm() <= 1e-9) throw CoincidentCentres();
  v_x.normalize();

  Vec3 v_y = v_x.cross(pose_k.axis_z());
  if (v_y.norm() <= 1e-9) throw DegenerateBaseline();
  v_y.normalize();
  return {v_x, v_y};
}

VerticalDetection detect_vertical(const Vec3& v_x, const CameraPose& pose_k) {
  const Mat3 cam_to_world = pose_k.rotation.transpose();
  const Vec3 a1 = cam_to_world * Vec3(1, 1, 0);
  const Vec3 a2 = cam_to_world * Vec3(-1, 1, 0);
  VerticalDetection det;
  det.s = std::abs(sgn(a1.dot(v_x)) + sgn(a2.dot(v_x)));
  det.swap = det.s != 0.0;
  return det;
}

OrientedAxes orient_axes(const Vec3& v_x, const Vec3& v_y, const CameraPose& pose_k) {
  const Mat3 cam_to_world = pose_k.rotation.transpose();
  const Vec3 a3 = cam_to_world * Vec3(1, 0, 0);
  const Vec3 a4 = cam_to_world * Vec3(0, 1, 0);
  OrientedAxes out;
  out.sign_x = sgn(a3.dot(v_x));
  out.sign_y = sgn(a4.dot(v_y));
  out.v_x = out.sign_x * v_x;
  out.v_y = out.sign_y * v_y;
  return out;
}

RectifyingBasis rectifying_basis(const CameraPose& pose_k, const CameraPose& pose_k2) {
  auto [v_x, v_y] = baseline_axes(pose_k, pose_k2);

  const VerticalDetection det = detect_vertical(v_x, pose_k);
  if (det.swap) std::swap(v_x, v_y);

  const OrientedAxes oriented = orient_axes(v_x, v_y, pose_k);

  RectifyingBasis basis;
  basis.v_x = oriented.v_x;
  basis.v_y = oriented.v_y;
  basis.v_z = oriented.v_x.cross(oriented.v_y);
  basis.swap_applied = det.swap;
  basis.sign_x = oriented.sign_x;
  basis.sign_y = oriented.sign_y;
  return basis;
}

WarpPair build_warp_pair(const CameraPose& pose_k, const CameraPose& pose_k2,
                         const CameraIntrinsics& k_k, const CameraIntrinsics& k_k2,
                         bool recentre, const PixelBox* content_k, const PixelBox* content_k2) {
  if (std::abs(k_k.matrix().determinant()) < 1e-12 ||
      std::abs(k_k2.matrix().determinant()) < 1e-12) {
    throw SingularIntrinsics();
  }

  const RectifyingBasis basis = rectifying_basis(pose_k, pose_k2);
  const Mat3 r_tilde = basis.rotation();

  WarpPair wp;
  wp.basis = basis;
  wp.k_tilde.fx = 0.5 * (k_k.fx + k_k2.fx);
  wp.k_tilde.fy = 0.5 * (k_k.fy + k_k2.fy);
  wp.k_tilde.cx = 0.5 * (k_k.cx + k_k2.cx);
  wp.k_tilde.cy = 0.5 * (k_k.cy + k_k2.cy);
  wp.k_tilde.width = std::max(k_k.width, k_k2.width);
  wp.k_tilde.height = std::max(k_k.height, k_k2.height);

  const Mat3 inv_k = invert_or_throw(k_k.matrix() * pose_k.rotation);
  const Mat3 inv_k2 = invert_or_throw(k_k2.matrix() * pose_k2.rotation);

  auto make_warps = [&](const CameraIntrinsics& kt) {
    const Mat3 lhs = kt.matrix() * r_tilde;
    wp.warp_k = lhs * inv_k;
    wp.warp_k2 = lhs * inv_k2;
  };
  make_warps(wp.k_tilde);

  if (recentre) {
    // Frame the union of both warped footprints: zoom out if it cannot fit
    // (wide pairs put the two contents a full parallax apart), then centre.
    // Both warps share every K-tilde change, so epipolar alignment and the
    // preserved optic centres are untouched.
    auto union_box = [&]() {
      double lo_u = std::numeric_limits<double>::infinity(), lo_v = lo_u;
      double hi_u = -lo_u, hi_v = -lo_u;
      auto grow = [&](const Mat3& w, const CameraIntrinsics& src, const PixelBox* content) {
        PixelBox box;
        if (content && !content->empty) {
          box = *content;
        } else {
          box.grow(0, 0);
          box.grow(src.width - 1, src.height - 1);
        }
        const Vec2 corners[4] = {Vec2(box.lo_u, box.lo_v), Vec2(box.hi_u, box.lo_v),
                                 Vec2(box.lo_u, box.hi_v), Vec2(box.hi_u, box.hi_v)};
        for (const Vec2& c : corners) {
          const Vec2 m = apply_homography(w, c);
          lo_u = std::min(lo_u, m.x());
          hi_u = std::max(hi_u, m.x());
          lo_v = std::min(lo_v, m.y());
          hi_v = std::max(hi_v, m.y());
        }
      };
      grow(wp.warp_k, k_k, content_k);
      grow(wp.warp_k2, k_k2, content_k2);
      return std::array<double, 4>{lo_u, lo_v, hi_u, hi_v};
    };

    auto box = union_box();
    double span_u = box[2] - box[0];
    double span_v = box[3] - box[1];

    // Wide pairs place the two footprints a full parallax apart, beyond what
    // the source-sized raster can hold; grow the raster (bounded) before
    // sacrificing resolution.
    const int max_growth = 4;
    if (span_u > wp.k_tilde.width - 1) {
      wp.k_tilde.width = std::min(static_cast<int>(std::ceil(span_u)) + 2,
                                  max_growth * wp.k_tilde.width);
    }
    if (span_v > wp.k_tilde.height - 1) {
      wp.k_tilde.height = std::min(static_cast<int>(std::ceil(span_v)) + 2,
                                   max_growth * wp.k_tilde.height);
    }

    const double fit = std::min((wp.k_tilde.width - 1) / std::max(span_u, 1.0),
                                (wp.k_tilde.height - 1) / std::max(span_v, 1.0));
    if (fit < 1.0) {
      wp.k_tilde.fx *= 0.96 * fit;
      wp.k_tilde.fy *= 0.96 * fit;
      make_warps(wp.k_tilde);
      box = union_box();
    }
    wp.k_tilde.cx += 0.5 * (wp.k_tilde.width - 1) - 0.5 * (box[0] + box[2]);
    wp.k_tilde.cy += 0.5 * (wp.k_tilde.height - 1) - 0.5 * (box[1] + box[3]);
    make_warps(wp.k_tilde);
  }

  wp.pose_k.rotation = r_tilde;
  wp.pose_k.translation = -(r_tilde * optic_centre(pose_k));
  wp.pose_k2.rotation = r_tilde;
  wp.pose_k2.translation = -(r_tilde * optic_centre(pose_k2));
  return wp;
}

std::pair<Image, Mask> warp_image(const Image& img, const Mat3& warp, int out_width,
                                  int out_height) {
  const Mat3 inv = invert_or_throw(warp);
  Image out(out_width, out_height);
  Mask mask(out_width, out_height);

  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const Vec2 src = apply_homography(inv, Vec2(x, y));
      if (src.x() < 0 || src.x() > img.width - 1 || src.y() < 0 || src.y() > img.height - 1) {
        continue;
      }
      const auto rgb = img.sample_bilinear(src.x(), src.y());
      out.set(x, y, rgb[0], rgb[1], rgb[2]);
      mask.at(x, y) = 1;
    }
  }
  return {std::move(out), std::move(mask)};
}

std::pair<DepthMap, CoordMap3D> warp_depth(const DepthMap& depth, const CameraPose& pose,
                                           const CameraIntrinsics& k, const WarpPair& wp,
                                           PairSide side) {
  if (depth.width != k.width || depth.height != k.height) {
    throw DimensionMismatch("depth map size does not match intrinsics");
  }
  const Mat3& warp = side == PairSide::k ? wp.warp_k : wp.warp_k2;
  const CameraPose& rect_pose = side == PairSide::k ? wp.pose_k : wp.pose_k2;
  const Vec3 centre = optic_centre(rect_pose);
  const int ow = wp.k_tilde.width;
  const int oh = wp.k_tilde.height;

  DepthMap out_depth(ow, oh);
  CoordMap3D out_coords(ow, oh);

  // Forward transfer of exact 3D points; a rounded target pixel keeps the
  // point nearest to the optic centre (ties: lowest source index).
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      if (!depth.valid.at(x, y)) continue;
      const double d = depth.at(x, y);
      if (!(d > 0)) continue;
      const Vec3 point = unproject(Vec2(x, y), d, pose, k);
      const Vec2 target = apply_homography(warp, Vec2(x, y));
      const int tx = static_cast<int>(std::lround(target.x()));
      const int ty = static_cast<int>(std::lround(target.y()));
      if (tx < 0 || tx >= ow || ty < 0 || ty >= oh) continue;
      const double dist = (point - centre).norm();
      if (out_depth.valid.at(tx, ty) && out_depth.at(tx, ty) <= dist) continue;
      out_depth.at(tx, ty) = static_cast<float>(dist);
      out_depth.valid.at(tx, ty) = 1;
      out_coords.at(tx, ty) = point;
      out_coords.valid.at(tx, ty) = 1;
    }
  }
  return {std::move(out_depth), std::move(out_coords)};
}

namespace {

PixelBox depth_content_box(const DepthMap& depth) {
  PixelBox box;
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      if (depth.valid.at(x, y)) box.grow(x, y);
    }
  }
  return box;
}

}  // namespace

RectifiedPair rectify_pair(const Image& img_k, const DepthMap& depth_k, const CameraPose& pose_k,
                           const CameraIntrinsics& k_k, const Image& img_k2,
                           const DepthMap& depth_k2, const CameraPose& pose_k2,
                           const CameraIntrinsics& k_k2, bool recentre) {
  // Frame the raster around the content that actually carries geometry.
  const PixelBox box_k = depth_content_box(depth_k);
  const PixelBox box_k2 = depth_content_box(depth_k2);
  RectifiedPair pair;
  pair.warp = build_warp_pair(pose_k, pose_k2, k_k, k_k2, recentre, &box_k, &box_k2);
  const int ow = pair.warp.k_tilde.width;
  const int oh = pair.warp.k_tilde.height;

  auto warp_side = [&](const Image& img, const DepthMap& depth, const CameraPose& pose,
                       const CameraIntrinsics& k, PairSide side) {
    RectifiedView view;
    const Mat3& w = side == PairSide::k ? pair.warp.warp_k : pair.warp.warp_k2;
    std::tie(view.image, view.image_valid) = warp_image(img, w, ow, oh);
    std::tie(view.depth, view.coords) = warp_depth(depth, pose, k, pair.warp, side);
    return view;
  };
  pair.view_k = warp_side(img_k, depth_k, pose_k, k_k, PairSide::k);
  pair.view_k2 = warp_side(img_k2, depth_k2, pose_k2, k_k2, PairSide::k2);
  return pair;
}

}  // namespace dvm
