#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "dvm/morph.h"
#include "morph_fixtures.h"
#include "test_support.h"

using namespace dvm;
using namespace dvm::testing;

namespace {

CameraPose rectified_pose(const Mat3& rotation, const Vec3& centre) {
  CameraPose pose;
  pose.rotation = rotation;
  pose.translation = -(rotation * centre);
  return pose;
}

}  // namespace

TEST_CASE("interpolate_pose endpoints return the inputs exactly") {
  Rng rng(89);
  const Mat3 r = random_rotation(rng);
  const CameraPose a = rectified_pose(r, Vec3(1, 2, 3));
  const CameraPose b = rectified_pose(r, Vec3(4, 0, -1));
  CHECK((interpolate_pose(a, b, 0.0).translation - a.translation).norm() == 0.0);
  CHECK((interpolate_pose(a, b, 1.0).translation - b.translation).norm() == 0.0);
}

TEST_CASE("interpolate_pose midpoint lands on the centre midpoint") {
  Rng rng(97);
  const Mat3 r = random_rotation(rng);
  const Vec3 ca(0.5, -1, 2), cb(2.5, 3, -4);
  const CameraPose mid = interpolate_pose(rectified_pose(r, ca), rectified_pose(r, cb), 0.5);
  CHECK((optic_centre(mid) - 0.5 * (ca + cb)).norm() < 1e-9);
  CHECK((mid.rotation - r).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("interpolated centres stay on the connecting segment") {
  Rng rng(101);
  const Mat3 r = random_rotation(rng);
  const Vec3 ca(0, 0, 0), cb(3, 1, -2);
  for (double alpha : {0.1, 0.25, 0.6, 0.9}) {
    const Vec3 c = optic_centre(interpolate_pose(rectified_pose(r, ca), rectified_pose(r, cb), alpha));
    // Collinearity plus bounded parameter.
    const double t = (c - ca).dot(cb - ca) / (cb - ca).squaredNorm();
    CHECK(t == doctest::Approx(alpha).epsilon(1e-9));
    CHECK(((ca + t * (cb - ca)) - c).norm() < 1e-9);
  }
}

TEST_CASE("interpolate_pose rejects non-rectified inputs") {
  Rng rng(103);
  const CameraPose a = rectified_pose(random_rotation(rng), Vec3(0, 0, 0));
  const CameraPose b = rectified_pose(random_rotation(rng), Vec3(1, 0, 0));
  CHECK_THROWS_AS(interpolate_pose(a, b, 0.5), NotRectified);
}

TEST_CASE("to_point_cloud of an all-invalid mask is empty") {
  Image img(8, 8);
  Mask mask(8, 8, 0);
  CoordMap3D coords(8, 8);
  CHECK(to_point_cloud(img, mask, coords).size() == 0);
}

TEST_CASE("to_point_cloud keeps a single valid pixel") {
  Image img(8, 8);
  img.set(3, 5, 0.1f, 0.6f, 0.9f);
  Mask mask(8, 8, 0);
  mask.at(3, 5) = 1;
  CoordMap3D coords(8, 8);
  coords.at(3, 5) = Vec3(1, 2, 3);
  coords.valid.at(3, 5) = 1;

  const ColoredPointCloud cloud = to_point_cloud(img, mask, coords);
  REQUIRE(cloud.size() == 1);
  CHECK(cloud.colors[0][2] == doctest::Approx(0.9f));
  CHECK((cloud.points[0] - Vec3(1, 2, 3)).norm() == 0.0);
  CHECK(cloud.source_pixels[0] == 5 * 8 + 3);
}

TEST_CASE("to_point_cloud lifts a full synthetic plane") {
  const CameraIntrinsics k = test_intrinsics(16, 16);
  const CameraPose pose;  // identity: camera at the origin looking along +z
  const double plane_z = 2.5;

  Image img(16, 16, 0.5f);
  Mask mask(16, 16, 1);
  CoordMap3D coords(16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const Vec3 dir = pixel_ray_direction(Vec2(x, y), pose, k);
      coords.at(x, y) = unproject(Vec2(x, y), plane_z / dir.z(), pose, k);
      coords.valid.at(x, y) = 1;
    }
  }
  const ColoredPointCloud cloud = to_point_cloud(img, mask, coords);
  REQUIRE(cloud.size() == 16 * 16);
  for (const Vec3& p : cloud.points) CHECK(std::abs(p.z() - plane_z) < 1e-6);
}

TEST_CASE("fuse_project keeps the nearer of two colliding points") {
  CameraIntrinsics k = test_intrinsics(9, 9);
  const CameraPose pose;  // identity

  ColoredPointCloud cloud;
  // Both points sit on the optical axis, distances 3 then 2.
  cloud.points.push_back(Vec3(0, 0, 3));
  cloud.colors.push_back({1.f, 0.f, 0.f});
  cloud.source_pixels.push_back(0);
  cloud.points.push_back(Vec3(0, 0, 2));
  cloud.colors.push_back({0.f, 1.f, 0.f});
  cloud.source_pixels.push_back(1);

  const MorphResult out = fuse_project(cloud, ColoredPointCloud{}, pose, k);
  const int cx = 4, cy = 4;
  CHECK(out.valid.at(cx, cy) == 1);
  CHECK(out.image.at(cx, cy)[1] == doctest::Approx(1.f));
  CHECK(out.depth.at(cx, cy) == doctest::Approx(2.f));
  CHECK(out.valid.count_valid() == 1);
}

TEST_CASE("fuse_project of empty clouds is fully invalid") {
  const MorphResult out =
      fuse_project(ColoredPointCloud{}, ColoredPointCloud{}, CameraPose{}, test_intrinsics(6, 6));
  CHECK(out.valid.count_valid() == 0);
  CHECK(out.image.at(0, 0)[0] == doctest::Approx(1.f));  // background fill
}

TEST_CASE("fuse_project drops points behind the camera") {
  ColoredPointCloud cloud;
  cloud.points.push_back(Vec3(0, 0, -2));
  cloud.colors.push_back({1.f, 0.f, 0.f});
  cloud.source_pixels.push_back(0);
  const MorphResult out =
      fuse_project(cloud, ColoredPointCloud{}, CameraPose{}, test_intrinsics(6, 6));
  CHECK(out.valid.count_valid() == 0);
}

TEST_CASE("alpha=0 morph reproduces the rectified reference image") {
  const MorphFixture fx = make_morph_fixture(0.35);
  const MorphResult morph =
      fuse_project(fx.cloud_a, fx.cloud_b, fx.rect.warp.pose_k, fx.rect.warp.k_tilde, 0.0);

  int compared = 0;
  float worst = 0.f;
  for (int y = 0; y < morph.image.height; ++y) {
    for (int x = 0; x < morph.image.width; ++x) {
      if (!morph.valid.at(x, y)) continue;
      if (!fx.rect.view_k.image_valid.at(x, y) || !fx.rect.view_k.coords.valid.at(x, y)) continue;
      ++compared;
      for (int c = 0; c < 3; ++c) {
        worst = std::max(worst,
                         std::abs(morph.image.at(x, y)[c] - fx.rect.view_k.image.at(x, y)[c]));
      }
    }
  }
  CHECK(compared > 300);
  CHECK(worst <= 1.f / 255.f);
}

TEST_CASE("alpha=1 morph reproduces the rectified second image") {
  const MorphFixture fx = make_morph_fixture(0.35);
  const MorphResult morph =
      fuse_project(fx.cloud_a, fx.cloud_b, fx.rect.warp.pose_k2, fx.rect.warp.k_tilde, 1.0);

  int compared = 0;
  float worst = 0.f;
  for (int y = 0; y < morph.image.height; ++y) {
    for (int x = 0; x < morph.image.width; ++x) {
      if (!morph.valid.at(x, y)) continue;
      if (!fx.rect.view_k2.image_valid.at(x, y) || !fx.rect.view_k2.coords.valid.at(x, y)) {
        continue;
      }
      ++compared;
      for (int c = 0; c < 3; ++c) {
        worst = std::max(worst,
                         std::abs(morph.image.at(x, y)[c] - fx.rect.view_k2.image.at(x, y)[c]));
      }
    }
  }
  CHECK(compared > 300);
  CHECK(worst <= 1.f / 255.f);
}

TEST_CASE("fuse_project is independent of point order") {
  const MorphFixture fx = make_morph_fixture(0.3, 32);
  const CameraPose pose =
      interpolate_pose(fx.rect.warp.pose_k, fx.rect.warp.pose_k2, 0.4);
  const MorphResult base = fuse_project(fx.cloud_a, fx.cloud_b, pose, fx.rect.warp.k_tilde, 0.4);

  Rng rng(107);
  auto shuffled = [&](const ColoredPointCloud& cloud) {
    std::vector<size_t> order(cloud.size());
    std::iota(order.begin(), order.end(), size_t(0));
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    ColoredPointCloud out;
    for (size_t i : order) {
      out.points.push_back(cloud.points[i]);
      out.colors.push_back(cloud.colors[i]);
      out.source_pixels.push_back(cloud.source_pixels[i]);
    }
    return out;
  };
  const MorphResult perm =
      fuse_project(shuffled(fx.cloud_a), shuffled(fx.cloud_b), pose, fx.rect.warp.k_tilde, 0.4);

  CHECK(base.image.data == perm.image.data);
  CHECK(base.valid.data == perm.valid.data);
  CHECK(base.depth.data == perm.depth.data);
}

TEST_CASE("morph depth equals the winner's distance to the optic centre") {
  const MorphFixture fx = make_morph_fixture(0.3, 32);
  const CameraPose pose = interpolate_pose(fx.rect.warp.pose_k, fx.rect.warp.pose_k2, 0.5);
  const MorphResult out = fuse_project(fx.cloud_a, fx.cloud_b, pose, fx.rect.warp.k_tilde, 0.5);
  const Vec3 centre = optic_centre(pose);

  // Re-run the assignment as an oracle: for every valid pixel the stored depth
  // must equal the smallest point distance among points hitting that pixel.
  const int w = out.image.width;
  std::vector<double> best(size_t(w) * out.image.height, 1e300);
  auto scan = [&](const ColoredPointCloud& cloud) {
    for (size_t i = 0; i < cloud.size(); ++i) {
      const Vec3 cam = pose.rotation * cloud.points[i] + pose.translation;
      if (cam.z() <= 0) continue;
      const int px = static_cast<int>(std::lround(fx.rect.warp.k_tilde.fx * cam.x() / cam.z() +
                                                  fx.rect.warp.k_tilde.cx));
      const int py = static_cast<int>(std::lround(fx.rect.warp.k_tilde.fy * cam.y() / cam.z() +
                                                  fx.rect.warp.k_tilde.cy));
      if (px < 0 || px >= w || py < 0 || py >= out.image.height) continue;
      best[size_t(py) * w + px] =
          std::min(best[size_t(py) * w + px], (cloud.points[i] - centre).norm());
    }
  };
  scan(fx.cloud_a);
  scan(fx.cloud_b);

  for (int y = 0; y < out.image.height; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!out.valid.at(x, y)) continue;
      CHECK(std::abs(out.depth.at(x, y) - best[size_t(y) * w + x]) < 1e-6);
    }
  }
}

TEST_CASE("a midpoint morph approximates an oracle render at the interpolated pose") {
  CameraIntrinsics k;
  k.width = k.height = 64;
  k.fx = k.fy = 0.5 * 64 / std::tan(0.5 * 0.6911112);
  k.cx = k.cy = 0.5 * (64 - 1);

  const OracleScene scene = make_desk_scene();
  const auto ring = make_ring_cameras(12, 4.0, 0.5, Vec3::Zero(), k);
  const OracleRender ra = render_oracle(scene, ring[0]);
  const OracleRender rb = render_oracle(scene, ring[3]);

  const RectifiedPair rect = rectify_pair(ra.view.image, ra.depth, ring[0].pose, k,
                                          rb.view.image, rb.depth, ring[3].pose, k, true);
  const ColoredPointCloud ca =
      to_point_cloud(rect.view_k.image, rect.view_k.image_valid, rect.view_k.coords);
  const ColoredPointCloud cb =
      to_point_cloud(rect.view_k2.image, rect.view_k2.image_valid, rect.view_k2.coords);

  const CameraPose pose = interpolate_pose(rect.warp.pose_k, rect.warp.pose_k2, 0.5);
  const MorphResult morph = fuse_project(ca, cb, pose, rect.warp.k_tilde, 0.5);

  CameraModel morph_cam;
  morph_cam.intrinsics = rect.warp.k_tilde;
  morph_cam.pose = pose;
  const OracleRender gt = render_oracle(scene, morph_cam);

  double sse = 0.0;
  size_t n = 0;
  for (int y = 0; y < morph.image.height; ++y) {
    for (int x = 0; x < morph.image.width; ++x) {
      if (!morph.valid.at(x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = morph.image.at(x, y)[c] - gt.view.image.at(x, y)[c];
        sse += d * d;
      }
      n += 3;
    }
  }
  REQUIRE(n > 3000);
  const double masked_psnr = 10.0 * std::log10(1.0 / (sse / double(n)));
  CHECK(masked_psnr > 20.0);
}

TEST_CASE("sample_alpha with sigma 0.2 is centred and in range") {
  Rng rng(109);
  double sum = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double a = sample_alpha(rng, 0.2);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    sum += a;
  }
  CHECK(sum / 10000.0 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("sample_alpha with vanishing sigma concentrates at one half") {
  Rng rng(113);
  for (int i = 0; i < 100; ++i) {
    CHECK(std::abs(sample_alpha(rng, 1e-6) - 0.5) < 1e-4);
  }
}

TEST_CASE("sample_alpha is reproducible for a fixed seed") {
  Rng a(127), b(127);
  for (int i = 0; i < 50; ++i) CHECK(sample_alpha(a, 0.2) == sample_alpha(b, 0.2));
}

TEST_CASE("pair_valid rejects distant pairs") {
  CameraPose a;  // centre at origin
  CameraPose b;
  b.translation = Vec3(0, 0, -7);  // centre at (0,0,7): on a's axis but too far
  const PairValidity v = pair_valid(a, b, test_intrinsics(), test_intrinsics(),
                                    PairFilterConfig{6.0});
  CHECK_FALSE(v.valid);
  CHECK(v.reason == PairReason::TooFar);
}

TEST_CASE("pair_valid flags a camera staring at the other's centre") {
  CameraPose a;  // at origin looking along +z
  CameraPose b;
  b.translation = Vec3(0, 0, -3);  // centre (0,0,3): right in front of a
  const PairValidity v = pair_valid(a, b, test_intrinsics(), test_intrinsics(),
                                    PairFilterConfig{6.0});
  CHECK_FALSE(v.valid);
  CHECK(v.reason == PairReason::Singular);
}

TEST_CASE("pair_valid accepts a 30-degree sphere pair") {
  const CameraIntrinsics k = test_intrinsics(64, 64);
  const CameraPose a = look_at_pose(Vec3(4, 0, 0), Vec3::Zero());
  const CameraPose b =
      look_at_pose(Vec3(4 * std::cos(M_PI / 6), 4 * std::sin(M_PI / 6), 0), Vec3::Zero());
  const PairValidity v = pair_valid(a, b, k, k, PairFilterConfig{6.0});
  CHECK(v.valid);
  CHECK(v.reason == PairReason::Valid);
}
