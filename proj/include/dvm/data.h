#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dvm/geometry.h"
#include "dvm/image.h"

namespace dvm {

struct MissingField : std::runtime_error {
  explicit MissingField(const std::string& name) : std::runtime_error("missing field: " + name) {}
};
struct MalformedMatrix : std::runtime_error {
  explicit MalformedMatrix(const std::string& what) : std::runtime_error(what) {}
};

// One dataset view: a full-frame image bound to its camera. Morphed views use
// the mask to mark pixels with no synthesized content.
struct View {
  std::string name;
  Image image;
  Mask valid;
  CameraModel camera;
  std::optional<DepthMap> depth;  // exact depths when the source is synthetic
};

struct SceneDataset {
  std::vector<View> train;
  std::vector<View> val;
  std::vector<View> test;
  double t_near = 2.0;
  double t_far = 6.0;
  std::array<float, 3> background = {1.f, 1.f, 1.f};
};

// Reads a NeRF-synthetic style dataset. `path` is either a scene directory
// holding transforms_{train,val,test}.json or a single transforms JSON (the
// split is inferred from the file name). Camera conventions: the JSON stores
// camera-to-world with x right / y up / z backward; poses are converted to
// the internal x right / y down / z forward frame. RGBA images are
// alpha-composited over the background at load.
SceneDataset load_transforms(const std::string& path);

// Writes views back out in the same JSON format (plus one mask PNG per frame
// when a view has invalid pixels).
void save_transforms(const std::string& dir, const std::string& split_name,
                     const std::vector<View>& views);

// ---------------------------------------------------------------------------
// Procedural ray-traced scene with exact depths

struct Material {
  enum class Pattern { Solid, Checker, Waves };
  Pattern pattern = Pattern::Solid;
  std::array<float, 3> color_a = {0.8f, 0.8f, 0.8f};
  std::array<float, 3> color_b = {0.2f, 0.2f, 0.2f};
  double scale = 1.0;

  std::array<float, 3> albedo(const Vec3& p) const;
};

struct Sphere {
  Vec3 centre = Vec3::Zero();
  double radius = 1.0;
  Material material;
};

struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Ones();
  Material material;
};

struct OracleScene {
  std::vector<Sphere> spheres;
  std::vector<Box> boxes;
  std::array<float, 3> background = {1.f, 1.f, 1.f};
  Vec3 light_dir = Vec3(-0.4, 0.3, 1.0).normalized();  // towards the light
  double ambient = 0.35;

  struct Hit {
    double t = 0.0;
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::Zero();
    const Material* material = nullptr;
  };

  std::optional<Hit> trace(const Vec3& origin, const Vec3& dir) const;
  std::array<float, 3> shade(const Hit& hit) const;
};

// The two-primitive desk scene used by the tooling.
OracleScene make_desk_scene();

struct OracleRender {
  View view;       // full-frame image, mask all valid
  DepthMap depth;  // exact ray distances, invalid on background
};

OracleRender render_oracle(const OracleScene& scene, const CameraModel& camera,
                           const std::string& name = "oracle");

// n cameras evenly spaced in azimuth on a circle of the given radius and
// elevation (radians above the horizontal plane, world z up), all looking at
// look_at.
std::vector<CameraModel> make_ring_cameras(int n, double radius, double elevation,
                                           const Vec3& look_at, const CameraIntrinsics& k);

// n cameras on a golden-angle spiral over the upper hemisphere band
// [elev_lo, elev_hi], all looking at look_at. Mimics the spread of inward
// facing captures better than a single ring.
std::vector<CameraModel> make_hemisphere_cameras(int n, double radius, double elev_lo,
                                                 double elev_hi, const Vec3& look_at,
                                                 const CameraIntrinsics& k);

CameraPose look_at_pose(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3(0, 0, 1));

}  // namespace dvm
