#include <algorithm>
#include <set>

#include "doctest.h"
#include "dvm/geometry.h"
#include "test_support.h"

using namespace dvm;
using namespace dvm::testing;

TEST_CASE("optic centre of the identity pose is the origin") {
  CameraPose pose;
  CHECK(optic_centre(pose).norm() == doctest::Approx(0.0));
}

TEST_CASE("optic centre inverts a pure translation") {
  CameraPose pose;
  pose.translation = Vec3(0, 0, -4);
  CHECK((optic_centre(pose) - Vec3(0, 0, 4)).norm() < 1e-12);
}

TEST_CASE("optic centre satisfies R*o + t = 0 for random poses") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const CameraPose pose = random_pose(rng);
    const Vec3 o = optic_centre(pose);
    CHECK((pose.rotation * o + pose.translation).norm() < 1e-9);
  }
}

TEST_CASE("point on the optical axis projects to the principal point") {
  Rng rng(11);
  const CameraPose pose = random_pose(rng);
  const CameraIntrinsics k = test_intrinsics();
  const double d = 2.5;
  const Vec3 p = optic_centre(pose) + d * pose.axis_z();
  const Projection proj = project(p, pose, k);
  CHECK(proj.pixel.x() == doctest::Approx(k.cx).epsilon(1e-9));
  CHECK(proj.pixel.y() == doctest::Approx(k.cy).epsilon(1e-9));
  CHECK(proj.depth == doctest::Approx(d).epsilon(1e-9));
}

TEST_CASE("project matches the homogeneous-matrix oracle") {
  Rng rng(13);
  const CameraIntrinsics k = test_intrinsics();
  for (int trial = 0; trial < 200; ++trial) {
    const CameraPose pose = random_pose(rng);
    const Vec3 p(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    const Vec3 cam = pose.rotation * p + pose.translation;
    if (std::abs(cam.z()) < 0.1) continue;  // keep the oracle well-conditioned
    const Projection proj = project(p, pose, k);
    const Vec2 expected = homogeneous_projection_oracle(p, pose, k);
    CHECK((proj.pixel - expected).norm() < 1e-9);
    CHECK(std::abs(proj.depth) == doctest::Approx(cam.norm()).epsilon(1e-12));
    CHECK((proj.depth > 0) == (cam.z() > 0));
  }
}

TEST_CASE("project throws at the optic centre") {
  Rng rng(17);
  const CameraPose pose = random_pose(rng);
  CHECK_THROWS_AS(project(optic_centre(pose), pose, test_intrinsics()), PointAtOpticCentre);
}

TEST_CASE("unproject places the point on the parametric ray") {
  Rng rng(19);
  const CameraIntrinsics k = test_intrinsics();
  for (int trial = 0; trial < 100; ++trial) {
    const CameraPose pose = random_pose(rng);
    const Vec2 px(rng.uniform(0, k.width - 1), rng.uniform(0, k.height - 1));
    const double depth = rng.uniform(0.5, 8.0);

    // Independent ray construction: camera-frame direction through the pixel,
    // rotated to world, walked from the centre.
    const Vec3 dir_cam =
        Vec3((px.x() - k.cx) / k.fx, (px.y() - k.cy) / k.fy, 1.0).normalized();
    const Vec3 expected = optic_centre(pose) + depth * (pose.rotation.transpose() * dir_cam);

    CHECK((unproject(px, depth, pose, k) - expected).norm() < 1e-9);
  }
}

TEST_CASE("unproject rejects non-positive depth") {
  CameraPose pose;
  CHECK_THROWS_AS(unproject(Vec2(1, 1), 0.0, pose, test_intrinsics()), NonPositiveDepth);
  CHECK_THROWS_AS(unproject(Vec2(1, 1), -2.0, pose, test_intrinsics()), NonPositiveDepth);
}

TEST_CASE("project and unproject are mutual inverses in front of the camera") {
  Rng rng(23);
  const CameraIntrinsics k = test_intrinsics();
  for (int trial = 0; trial < 200; ++trial) {
    const CameraPose pose = random_pose(rng);
    const Vec2 px(rng.uniform(0, k.width - 1), rng.uniform(0, k.height - 1));
    const double depth = rng.uniform(0.2, 9.0);
    const Vec3 p = unproject(px, depth, pose, k);
    const Projection proj = project(p, pose, k);
    CHECK((proj.pixel - px).norm() < 1e-6);
    CHECK(proj.depth == doctest::Approx(depth).epsilon(1e-6));
  }
}

TEST_CASE("fps_select with n == |positions| is a permutation") {
  Rng rng(29);
  std::vector<Vec3> pts;
  for (int i = 0; i < 9; ++i) {
    pts.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  }
  const std::vector<int> sel = fps_select(pts, 9, 3);
  std::set<int> unique(sel.begin(), sel.end());
  CHECK(unique.size() == 9);
}

TEST_CASE("fps_select on collinear points picks the far extreme") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 10; ++i) pts.emplace_back(double(i), 0, 0);
  const std::vector<int> sel = fps_select(pts, 2, 0);
  CHECK(sel == std::vector<int>{0, 9});
}

TEST_CASE("fps_select matches the brute-force greedy oracle") {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 8; ++i) {
      pts.emplace_back(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    }
    const int seed = static_cast<int>(rng.below(8));
    CHECK(fps_select(pts, 4, seed) == fps_oracle(pts, 4, seed));
  }
}

TEST_CASE("fps_select is stable under permutation of the input") {
  Rng rng(37);
  std::vector<Vec3> pts;
  for (int i = 0; i < 12; ++i) {
    pts.emplace_back(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
  }
  const std::vector<int> base = fps_select(pts, 5, 2);

  std::vector<int> perm(pts.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  for (size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

  std::vector<Vec3> shuffled(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) shuffled[perm[i]] = pts[i];

  const std::vector<int> sel = fps_select(shuffled, 5, perm[2]);
  std::set<int> mapped;
  for (int idx : sel) {
    for (size_t orig = 0; orig < perm.size(); ++orig) {
      if (perm[orig] == idx) mapped.insert(static_cast<int>(orig));
    }
  }
  CHECK(mapped == std::set<int>(base.begin(), base.end()));
}

TEST_CASE("fps_select validates its arguments") {
  std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  CHECK_THROWS_AS(fps_select(pts, 3, 0), InvalidCount);
  CHECK_THROWS_AS(fps_select(pts, 0, 0), InvalidCount);
  CHECK_THROWS_AS(fps_select(pts, 2, 5), InvalidCount);
}

TEST_CASE("fps_select greedy prefix property") {
  Rng rng(41);
  std::vector<Vec3> pts;
  for (int i = 0; i < 20; ++i) {
    pts.emplace_back(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
  }
  const std::vector<int> eight = fps_select(pts, 8, 0);
  const std::vector<int> four = fps_select(pts, 4, 0);
  CHECK(std::equal(four.begin(), four.end(), eight.begin()));
}
