#include "dvm/data.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "dvm/png_io.h"
#include "json.hpp"

namespace dvm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Mat3 gl_to_internal_rotation(const Mat3& c2w_gl) {
  // Camera axes in world coordinates; flip y (up -> down) and z (backward ->
  // forward), then world-to-camera is the transpose.
  Mat3 axes;
  axes.col(0) = c2w_gl.col(0);
  axes.col(1) = -c2w_gl.col(1);
  axes.col(2) = -c2w_gl.col(2);
  return axes.transpose();
}

CameraPose pose_from_transform(const Eigen::Matrix4d& c2w) {
  const Mat3 rot_gl = c2w.topLeftCorner<3, 3>();
  if ((rot_gl.transpose() * rot_gl - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-4) {
    throw MalformedMatrix("transform_matrix rotation is not orthonormal");
  }
  if ((c2w.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-6) {
    throw MalformedMatrix("transform_matrix last row is not [0 0 0 1]");
  }
  CameraPose pose;
  pose.rotation = gl_to_internal_rotation(rot_gl);
  pose.translation = -(pose.rotation * c2w.topRightCorner<3, 1>());
  return pose;
}

Eigen::Matrix4d transform_from_pose(const CameraPose& pose) {
  Eigen::Matrix4d c2w = Eigen::Matrix4d::Identity();
  const Mat3 cam_axes = pose.rotation.transpose();  // columns: internal axes in world
  c2w.block<3, 1>(0, 0) = cam_axes.col(0);
  c2w.block<3, 1>(0, 1) = -cam_axes.col(1);
  c2w.block<3, 1>(0, 2) = -cam_axes.col(2);
  c2w.block<3, 1>(0, 3) = optic_centre(pose);
  return c2w;
}

std::string resolve_image_path(const fs::path& base, const std::string& file_path) {
  fs::path p = base / file_path;
  if (fs::exists(p)) return p.string();
  fs::path with_ext = p;
  with_ext += ".png";
  if (fs::exists(with_ext)) return with_ext.string();
  throw ImageDecodeError("image file not found: " + p.string());
}

std::vector<View> load_split(const fs::path& json_path, const std::array<float, 3>& background) {
  std::ifstream in(json_path);
  if (!in) throw MissingField("transforms file: " + json_path.string());
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw MalformedMatrix(std::string("cannot parse transforms JSON: ") + e.what());
  }
  if (!root.contains("camera_angle_x")) throw MissingField("camera_angle_x");
  if (!root.contains("frames")) throw MissingField("frames");
  const double angle_x = root["camera_angle_x"].get<double>();

  std::vector<View> views;
  for (const json& frame : root["frames"]) {
    if (!frame.contains("file_path")) throw MissingField("file_path");
    if (!frame.contains("transform_matrix")) throw MissingField("transform_matrix");

    Eigen::Matrix4d c2w;
    const json& tm = frame["transform_matrix"];
    if (!tm.is_array() || tm.size() != 4) throw MalformedMatrix("transform_matrix is not 4x4");
    for (int r = 0; r < 4; ++r) {
      if (!tm[r].is_array() || tm[r].size() != 4) {
        throw MalformedMatrix("transform_matrix is not 4x4");
      }
      for (int c = 0; c < 4; ++c) c2w(r, c) = tm[r][c].get<double>();
    }

    View view;
    view.name = frame["file_path"].get<std::string>();
    view.camera.pose = pose_from_transform(c2w);

    const std::string img_path =
        resolve_image_path(json_path.parent_path(), frame["file_path"].get<std::string>());
    const LoadedPng png = read_png(img_path);
    view.image = Image(png.rgb.width, png.rgb.height);
    for (int y = 0; y < png.rgb.height; ++y) {
      for (int x = 0; x < png.rgb.width; ++x) {
        const float* src = png.rgb.at(x, y);
        const float a = png.has_alpha ? png.alpha[size_t(y) * png.rgb.width + x] : 1.f;
        view.image.set(x, y, src[0] * a + background[0] * (1.f - a),
                       src[1] * a + background[1] * (1.f - a),
                       src[2] * a + background[2] * (1.f - a));
      }
    }
    view.valid = Mask(view.image.width, view.image.height, 1);
    if (frame.contains("mask_path")) {
      view.valid = read_png_mask(
          resolve_image_path(json_path.parent_path(), frame["mask_path"].get<std::string>()));
    }

    CameraIntrinsics& k = view.camera.intrinsics;
    k.width = view.image.width;
    k.height = view.image.height;
    k.fx = k.fy = 0.5 * k.width / std::tan(0.5 * angle_x);
    k.cx = 0.5 * (k.width - 1);
    k.cy = 0.5 * (k.height - 1);
    views.push_back(std::move(view));
  }
  return views;
}

}  // namespace

SceneDataset load_transforms(const std::string& path) {
  SceneDataset ds;
  const fs::path p(path);
  if (fs::is_directory(p)) {
    bool any = false;
    if (fs::exists(p / "transforms_train.json")) {
      ds.train = load_split(p / "transforms_train.json", ds.background);
      any = true;
    }
    if (fs::exists(p / "transforms_val.json")) {
      ds.val = load_split(p / "transforms_val.json", ds.background);
      any = true;
    }
    if (fs::exists(p / "transforms_test.json")) {
      ds.test = load_split(p / "transforms_test.json", ds.background);
      any = true;
    }
    if (!any) throw MissingField("no transforms_*.json under " + path);
  } else {
    const std::string name = p.filename().string();
    std::vector<View> views = load_split(p, ds.background);
    if (name.find("val") != std::string::npos) {
      ds.val = std::move(views);
    } else if (name.find("test") != std::string::npos) {
      ds.test = std::move(views);
    } else {
      ds.train = std::move(views);
    }
  }
  return ds;
}

void save_transforms(const std::string& dir, const std::string& split_name,
                     const std::vector<View>& views) {
  const fs::path base(dir);
  fs::create_directories(base / split_name);

  json root;
  if (!views.empty()) {
    const CameraIntrinsics& k = views.front().camera.intrinsics;
    root["camera_angle_x"] = 2.0 * std::atan(0.5 * k.width / k.fx);
  } else {
    root["camera_angle_x"] = 0.0;
  }
  root["frames"] = json::array();

  int index = 0;
  for (const View& view : views) {
    const std::string rel = split_name + "/r_" + std::to_string(index);
    write_png((base / (rel + ".png")).string(), view.image);

    json frame;
    frame["file_path"] = "./" + rel;
    const Eigen::Matrix4d c2w = transform_from_pose(view.camera.pose);
    json tm = json::array();
    for (int r = 0; r < 4; ++r) {
      json row = json::array();
      for (int c = 0; c < 4; ++c) row.push_back(c2w(r, c));
      tm.push_back(row);
    }
    frame["transform_matrix"] = tm;
    if (view.valid.count_valid() != view.valid.data.size()) {
      const std::string mask_rel = rel + "_mask.png";
      write_png_mask((base / mask_rel).string(), view.valid);
      frame["mask_path"] = "./" + mask_rel;
    }
    root["frames"].push_back(frame);
    ++index;
  }

  std::ofstream out(base / ("transforms_" + split_name + ".json"));
  out << root.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Oracle scene

std::array<float, 3> Material::albedo(const Vec3& p) const {
  switch (pattern) {
    case Pattern::Solid:
      return color_a;
    case Pattern::Checker: {
      const int parity = (static_cast<int>(std::floor(p.x() * scale)) +
                          static_cast<int>(std::floor(p.y() * scale)) +
                          static_cast<int>(std::floor(p.z() * scale))) &
                         1;
      return parity ? color_b : color_a;
    }
    case Pattern::Waves: {
      const double m = 0.5 + 0.5 * std::sin(scale * (p.x() + 0.7 * p.y() + 0.4 * p.z()));
      std::array<float, 3> out;
      for (int c = 0; c < 3; ++c) {
        out[c] = static_cast<float>(color_a[c] * m + color_b[c] * (1.0 - m));
      }
      return out;
    }
  }
  return color_a;
}

namespace {

constexpr double kRayEps = 1e-9;

bool sphere_hit(const Sphere& s, const Vec3& o, const Vec3& d, double* t, Vec3* normal) {
  const Vec3 oc = o - s.centre;
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - c;
  if (disc < 0) return false;
  const double root = std::sqrt(disc);
  double tt = -b - root;
  if (tt <= kRayEps) tt = -b + root;
  if (tt <= kRayEps) return false;
  *t = tt;
  *normal = (o + tt * d - s.centre).normalized();
  return true;
}

bool box_hit(const Box& box, const Vec3& o, const Vec3& d, double* t, Vec3* normal) {
  double t_lo = -1e30, t_hi = 1e30;
  int axis = 0;
  double axis_sign = 1.0;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < box.lo[a] || o[a] > box.hi[a]) return false;
      continue;
    }
    double t0 = (box.lo[a] - o[a]) / d[a];
    double t1 = (box.hi[a] - o[a]) / d[a];
    double sign = -1.0;
    if (t0 > t1) {
      std::swap(t0, t1);
      sign = 1.0;
    }
    if (t0 > t_lo) {
      t_lo = t0;
      axis = a;
      axis_sign = sign;
    }
    t_hi = std::min(t_hi, t1);
    if (t_lo > t_hi) return false;
  }
  if (t_lo <= kRayEps) return false;  // inside or behind
  *t = t_lo;
  *normal = Vec3::Zero();
  (*normal)[axis] = axis_sign;
  return true;
}

}  // namespace

std::optional<OracleScene::Hit> OracleScene::trace(const Vec3& origin, const Vec3& dir) const {
  std::optional<Hit> best;
  auto consider = [&](double t, const Vec3& normal, const Material& mat) {
    if (!best || t < best->t) {
      best = Hit{t, origin + t * dir, normal, &mat};
    }
  };
  double t;
  Vec3 n;
  for (const Sphere& s : spheres) {
    if (sphere_hit(s, origin, dir, &t, &n)) consider(t, n, s.material);
  }
  for (const Box& b : boxes) {
    if (box_hit(b, origin, dir, &t, &n)) consider(t, n, b.material);
  }
  return best;
}

std::array<float, 3> OracleScene::shade(const Hit& hit) const {
  const std::array<float, 3> albedo = hit.material->albedo(hit.point);
  const double diffuse = std::max(0.0, hit.normal.dot(light_dir));
  const double gain = ambient + (1.0 - ambient) * diffuse;
  std::array<float, 3> out;
  for (int c = 0; c < 3; ++c) {
    out[c] = static_cast<float>(std::clamp(albedo[c] * gain, 0.0, 1.0));
  }
  return out;
}

OracleScene make_desk_scene() {
  OracleScene scene;
  Sphere s;
  s.centre = Vec3(-0.45, 0.25, 0.15);
  s.radius = 0.62;
  s.material.pattern = Material::Pattern::Checker;
  s.material.color_a = {0.85f, 0.38f, 0.3f};
  s.material.color_b = {0.9f, 0.58f, 0.36f};
  s.material.scale = 2.2;
  scene.spheres.push_back(s);

  Box b;
  b.lo = Vec3(0.05, -0.75, -0.55);
  b.hi = Vec3(0.95, 0.15, 0.45);
  b.material.pattern = Material::Pattern::Waves;
  b.material.color_a = {0.35f, 0.5f, 0.8f};
  b.material.color_b = {0.65f, 0.72f, 0.85f};
  b.material.scale = 4.0;
  scene.boxes.push_back(b);
  return scene;
}

OracleRender render_oracle(const OracleScene& scene, const CameraModel& camera,
                           const std::string& name) {
  const int w = camera.intrinsics.width;
  const int h = camera.intrinsics.height;
  OracleRender out;
  out.view.name = name;
  out.view.image = Image(w, h);
  out.view.valid = Mask(w, h, 1);
  out.view.camera = camera;
  out.depth = DepthMap(w, h);

  const Vec3 origin = optic_centre(camera.pose);
  // Color is 3x3 supersampled; depth stays the exact centre-ray distance.
  constexpr int kAa = 3;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc[3] = {0, 0, 0};
      for (int sy = 0; sy < kAa; ++sy) {
        for (int sx = 0; sx < kAa; ++sx) {
          const Vec2 px(x + (sx + 0.5) / kAa - 0.5, y + (sy + 0.5) / kAa - 0.5);
          const Vec3 dir = pixel_ray_direction(px, camera.pose, camera.intrinsics);
          const auto hit = scene.trace(origin, dir);
          if (hit) {
            const auto rgb = scene.shade(*hit);
            for (int c = 0; c < 3; ++c) acc[c] += rgb[c];
          } else {
            for (int c = 0; c < 3; ++c) acc[c] += scene.background[c];
          }
        }
      }
      out.view.image.set(x, y, static_cast<float>(acc[0] / (kAa * kAa)),
                         static_cast<float>(acc[1] / (kAa * kAa)),
                         static_cast<float>(acc[2] / (kAa * kAa)));

      const Vec3 dir = pixel_ray_direction(Vec2(x, y), camera.pose, camera.intrinsics);
      const auto hit = scene.trace(origin, dir);
      if (hit) {
        out.depth.at(x, y) = static_cast<float>(hit->t);
        out.depth.valid.at(x, y) = 1;
      }
    }
  }
  out.view.depth = out.depth;
  return out;
}

CameraPose look_at_pose(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) right = forward.cross(Vec3(0, 1, 0));  // looking straight up/down
  right.normalize();
  const Vec3 down = forward.cross(right).normalized();

  CameraPose pose;
  pose.rotation.row(0) = right;
  pose.rotation.row(1) = down;
  pose.rotation.row(2) = forward;
  pose.translation = -(pose.rotation * eye);
  return pose;
}

std::vector<CameraModel> make_ring_cameras(int n, double radius, double elevation,
                                           const Vec3& look_at, const CameraIntrinsics& k) {
  if (n < 1) throw InvalidCount("make_ring_cameras: n must be >= 1");
  std::vector<CameraModel> cameras;
  cameras.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double azimuth = 2.0 * M_PI * i / n;
    const Vec3 eye = look_at + radius * Vec3(std::cos(elevation) * std::cos(azimuth),
                                             std::cos(elevation) * std::sin(azimuth),
                                             std::sin(elevation));
    CameraModel cam;
    cam.intrinsics = k;
    cam.pose = look_at_pose(eye, look_at);
    cameras.push_back(cam);
  }
  return cameras;
}

std::vector<CameraModel> make_hemisphere_cameras(int n, double radius, double elev_lo,
                                                 double elev_hi, const Vec3& look_at,
                                                 const CameraIntrinsics& k) {
  if (n < 1) throw InvalidCount("make_hemisphere_cameras: n must be >= 1");
  constexpr double kGoldenAngle = 2.399963229728653;
  std::vector<CameraModel> cameras;
  cameras.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double frac = n == 1 ? 0.5 : double(i) / (n - 1);
    const double elevation = elev_lo + frac * (elev_hi - elev_lo);
    const double azimuth = std::fmod(i * kGoldenAngle, 2.0 * M_PI);
    const Vec3 eye = look_at + radius * Vec3(std::cos(elevation) * std::cos(azimuth),
                                             std::cos(elevation) * std::sin(azimuth),
                                             std::sin(elevation));
    CameraModel cam;
    cam.intrinsics = k;
    cam.pose = look_at_pose(eye, look_at);
    cameras.push_back(cam);
  }
  return cameras;
}

}  // namespace dvm
