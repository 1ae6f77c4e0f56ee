// Command-line pipeline driver: view selection, training, evaluation and
// one-shot morph inspection over NeRF-synthetic style datasets or the
// built-in procedural scene ("oracle" datasets).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dvm/data.h"
#include "dvm/field.h"
#include "dvm/metrics.h"
#include "dvm/morph.h"
#include "dvm/png_io.h"
#include "dvm/rectify.h"
#include "dvm/trainer.h"

namespace fs = std::filesystem;
using namespace dvm;

namespace {

// ---------------------------------------------------------------------------
// Content hashing (FNV-1a 64) for the run manifests.

uint64_t fnv1a(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ULL) {
  uint64_t h = seed;
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t hash_file(const fs::path& path, uint64_t seed) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return seed;
  char buf[1 << 16];
  uint64_t h = seed;
  while (is) {
    is.read(buf, sizeof(buf));
    h = fnv1a(buf, static_cast<size_t>(is.gcount()), h);
  }
  return h;
}

uint64_t hash_dataset_spec(const std::string& spec) {
  if (spec.rfind("oracle", 0) == 0) return fnv1a(spec.data(), spec.size());
  uint64_t h = 0xcbf29ce484222325ULL;
  const fs::path p(spec);
  std::vector<fs::path> files;
  if (fs::is_directory(p)) {
    for (const auto& entry : fs::recursive_directory_iterator(p)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
  } else if (fs::exists(p)) {
    files.push_back(p);
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& f : files) {
    const std::string name = f.string();
    h = fnv1a(name.data(), name.size(), h);
    h = hash_file(f, h);
  }
  return h;
}

std::string hex64(uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Run manifests: enough key=value state to replay the command byte-exactly.

struct Manifest {
  std::string command;
  std::map<std::string, std::string> args;
  std::vector<std::string> outputs;

  void write(const fs::path& path) const {
    std::ofstream os(path);
    os << "command=" << command << "\n";
    for (const auto& [k, v] : args) os << "arg." << k << "=" << v << "\n";
    for (const std::string& out : outputs) os << "output=" << out << "\n";
  }

  static Manifest read(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open manifest: " + path.string());
    Manifest m;
    std::string line;
    while (std::getline(is, line)) {
      const size_t eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(0, eq);
      const std::string value = line.substr(eq + 1);
      if (key == "command") {
        m.command = value;
      } else if (key.rfind("arg.", 0) == 0) {
        m.args[key.substr(4)] = value;
      } else if (key == "output") {
        m.outputs.push_back(value);
      }
    }
    return m;
  }
};

// ---------------------------------------------------------------------------
// Dataset resolution: a transforms directory/file, or "oracle[:N]" for the
// procedural desk scene with N ring cameras (train) plus 8 held-out views.

struct ResolvedDataset {
  SceneDataset scene;
  bool is_oracle = false;
};

ResolvedDataset resolve_dataset(const std::string& spec, int oracle_size) {
  ResolvedDataset out;
  if (spec.rfind("oracle", 0) == 0) {
    out.is_oracle = true;
    const bool hemisphere = spec.rfind("oracle-hemi", 0) == 0;
    int count = 12;
    const size_t colon = spec.find(':');
    if (colon != std::string::npos) count = std::stoi(spec.substr(colon + 1));
    if (count < 1) throw ConfigError("oracle dataset needs at least one view");

    const OracleScene scene = make_desk_scene();
    CameraIntrinsics k;
    k.width = k.height = oracle_size;
    k.fx = k.fy = 0.5 * oracle_size / std::tan(0.5 * 0.6911112);
    k.cx = k.cy = 0.5 * (oracle_size - 1);

    const std::vector<CameraModel> train_cams =
        hemisphere ? make_hemisphere_cameras(count, 4.0, 0.15, 1.05, Vec3::Zero(), k)
                   : make_ring_cameras(count, 4.0, 0.5, Vec3::Zero(), k);
    int index = 0;
    for (const CameraModel& cam : train_cams) {
      OracleRender render = render_oracle(scene, cam, "train/r_" + std::to_string(index++));
      out.scene.train.push_back(std::move(render.view));
    }

    // Held-out views sit between the candidate positions.
    std::vector<CameraModel> heldout_cams;
    if (hemisphere) {
      heldout_cams = make_hemisphere_cameras(8, 4.0, 0.3, 0.95, Vec3::Zero(), k);
      for (CameraModel& cam : heldout_cams) {
        const Vec3 centre = optic_centre(cam.pose);
        const double az = std::atan2(centre.y(), centre.x()) + 0.9;
        const double el = std::asin(centre.z() / 4.0);
        cam.pose = look_at_pose(
            4.0 * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)),
            Vec3::Zero());
      }
    } else {
      // Mid-gap azimuths relative to a four-view spread, at two elevations
      // straddling the training ring.
      for (const double elevation : {0.35, 0.65}) {
        for (int i = 0; i < 4; ++i) {
          const double az = M_PI / 4 + i * M_PI / 2;
          CameraModel cam;
          cam.intrinsics = k;
          cam.pose = look_at_pose(4.0 * Vec3(std::cos(elevation) * std::cos(az),
                                             std::cos(elevation) * std::sin(az),
                                             std::sin(elevation)),
                                  Vec3::Zero());
          heldout_cams.push_back(cam);
        }
      }
    }
    for (size_t i = 0; i < heldout_cams.size(); ++i) {
      OracleRender render =
          render_oracle(scene, heldout_cams[i], "val/r_" + std::to_string(i));
      out.scene.val.push_back(std::move(render.view));
      out.scene.test.push_back(out.scene.val.back());
    }
    out.scene.t_near = 1.0;
    out.scene.t_far = 7.0;
    return out;
  }
  out.scene = load_transforms(spec);
  return out;
}

std::vector<View>& split_of(SceneDataset& ds, const std::string& name) {
  if (name == "train") return ds.train;
  if (name == "val") return ds.val;
  if (name == "test") return ds.test;
  throw ConfigError("unknown split: " + name);
}

// ---------------------------------------------------------------------------
// Flat key=value config files mirroring TrainConfig.

DvmMode parse_dvm_mode(const std::string& s) {
  if (s == "on") return DvmMode::On;
  if (s == "off") return DvmMode::Off;
  if (s == "oracle-depth") return DvmMode::OracleDepth;
  throw ConfigError("unknown dvm mode: " + s + " (expected on|off|oracle-depth)");
}

void apply_config_line(TrainConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "total_iters") cfg.total_iters = std::stoi(value);
  else if (key == "lambda_warmup") cfg.lambda_warmup = std::stoi(value);
  else if (key == "eta_regen") cfg.eta_regen = std::stoi(value);
  else if (key == "m_views_per_pair") cfg.m_views_per_pair = std::stoi(value);
  else if (key == "gamma_distance") cfg.gamma_distance = std::stod(value);
  else if (key == "sigma_alpha") cfg.sigma_alpha = std::stod(value);
  else if (key == "batch_rays") cfg.batch_rays = std::stoi(value);
  else if (key == "lr") cfg.lr = std::stof(value);
  else if (key == "lr_final") cfg.lr_final = std::stof(value);
  else if (key == "seed") cfg.seed = std::stoull(value);
  else if (key == "eval_every") cfg.eval_every = std::stoi(value);
  else if (key == "t_near") cfg.t_near = std::stod(value);
  else if (key == "t_far") cfg.t_far = std::stod(value);
  else if (key == "opacity_threshold") cfg.opacity_threshold = std::stod(value);
  else if (key == "recentre") cfg.recentre_rectified = value == "1" || value == "true";
  else if (key == "dvm") cfg.dvm = parse_dvm_mode(value);
  else if (key == "l_pos") cfg.field.l_pos = std::stoi(value);
  else if (key == "l_dir") cfg.field.l_dir = std::stoi(value);
  else if (key == "trunk_layers") cfg.field.trunk_layers = std::stoi(value);
  else if (key == "hidden_dim") cfg.field.hidden_dim = std::stoi(value);
  else if (key == "color_hidden_dim") cfg.field.color_hidden_dim = std::stoi(value);
  else if (key == "gamma_coarse") cfg.field.gamma_coarse = std::stoi(value);
  else if (key == "gamma_fine") cfg.field.gamma_fine = std::stoi(value);
  else if (key == "density_shift") cfg.field.density_shift = std::stof(value);
  else throw ConfigError("unknown config key: " + key);
}

void load_config_file(TrainConfig& cfg, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("bad config line: " + line);
    apply_config_line(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
}

std::vector<int> read_index_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open view index file: " + path);
  std::vector<int> indices;
  int v;
  while (is >> v) indices.push_back(v);
  return indices;
}

// ---------------------------------------------------------------------------
// Subcommands. Each returns the manifest that gets persisted next to the
// outputs.

struct SelectArgs {
  std::string dataset;
  std::string split = "train";
  int count = 8;
  int seed_index = 0;
  int oracle_size = 64;
  std::string out_dir = "out";
};

Manifest run_select(const SelectArgs& a) {
  ResolvedDataset ds = resolve_dataset(a.dataset, a.oracle_size);
  const std::vector<View>& views = split_of(ds.scene, a.split);
  if (views.empty()) throw ConfigError("split has no views: " + a.split);
  if (a.count > static_cast<int>(views.size())) {
    throw InvalidCount("requested more views than the split holds");
  }

  std::vector<Vec3> centres;
  for (const View& v : views) centres.push_back(optic_centre(v.camera.pose));
  const std::vector<int> chosen = fps_select(centres, a.count, a.seed_index);

  fs::create_directories(a.out_dir);
  std::ofstream os(fs::path(a.out_dir) / "views.txt");
  for (int idx : chosen) os << idx << "\n";

  Manifest m;
  m.command = "select-views";
  m.args = {{"dataset", a.dataset},
            {"split", a.split},
            {"count", std::to_string(a.count)},
            {"seed_index", std::to_string(a.seed_index)},
            {"oracle_size", std::to_string(a.oracle_size)},
            {"input_hash", hex64(hash_dataset_spec(a.dataset))}};
  m.outputs = {"views.txt"};
  return m;
}

struct TrainArgs {
  std::string dataset;
  std::string views_file;
  std::string config_file;
  std::vector<std::string> overrides;  // key=value
  std::string dvm = "on";
  uint64_t seed = 0;
  int oracle_size = 64;
  bool dump_morphs = false;
  std::string out_dir = "out";
};

Manifest run_train(const TrainArgs& a) {
  TrainConfig cfg;
  if (!a.config_file.empty()) load_config_file(cfg, a.config_file);
  cfg.dvm = parse_dvm_mode(a.dvm);
  cfg.seed = a.seed;
  for (const std::string& kv : a.overrides) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: " + kv);
    apply_config_line(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }

  ResolvedDataset ds = resolve_dataset(a.dataset, a.oracle_size);
  if (a.config_file.empty()) {
    cfg.t_near = ds.scene.t_near;
    cfg.t_far = ds.scene.t_far;
  }
  if (cfg.dvm == DvmMode::OracleDepth && !ds.is_oracle) {
    throw ConfigError("oracle-depth morphing needs an oracle dataset with exact depths");
  }

  std::vector<View> train_views = ds.scene.train;
  if (!a.views_file.empty()) {
    std::vector<View> subset;
    for (int idx : read_index_file(a.views_file)) {
      if (idx < 0 || idx >= static_cast<int>(ds.scene.train.size())) {
        throw ConfigError("view index out of range: " + std::to_string(idx));
      }
      subset.push_back(ds.scene.train[idx]);
    }
    train_views = std::move(subset);
  }

  cfg.validate();
  const TrainResult result = train(train_views, ds.scene.val, ds.scene.background, cfg);

  fs::create_directories(a.out_dir);
  RenderParams render;
  render.t_near = cfg.t_near;
  render.t_far = cfg.t_far;
  render.background = ds.scene.background;
  save_checkpoint((fs::path(a.out_dir) / "checkpoint.bin").string(), result.field, render);
  {
    std::ofstream os(fs::path(a.out_dir) / "train_log.txt");
    os << result.log_text;
  }
  if (a.dump_morphs) {
    std::vector<View> morph_views;
    for (const auto& group : result.final_pool.morphs) {
      for (const PoolView& pv : group) {
        View view;
        view.name = "pair" + std::to_string(pv.pair_id);
        view.image = pv.image;
        view.valid = pv.valid;
        view.camera = pv.camera;
        morph_views.push_back(std::move(view));
      }
    }
    save_transforms(a.out_dir, "morphs", morph_views);
  }

  Manifest m;
  m.command = "train";
  m.args = {{"dataset", a.dataset},
            {"views", a.views_file},
            {"config", a.config_file},
            {"dvm", a.dvm},
            {"seed", std::to_string(a.seed)},
            {"oracle_size", std::to_string(a.oracle_size)},
            {"dump_morphs", a.dump_morphs ? "1" : "0"},
            {"input_hash", hex64(hash_dataset_spec(a.dataset))}};
  for (size_t i = 0; i < a.overrides.size(); ++i) {
    m.args["set" + std::to_string(i)] = a.overrides[i];
  }
  m.outputs = {"checkpoint.bin", "train_log.txt"};
  return m;
}

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  std::string split = "test";
  int oracle_size = 64;
  std::string out_dir = "out";
};

Manifest run_eval(const EvalArgs& a) {
  const CheckpointBundle bundle = load_checkpoint(a.checkpoint);
  ResolvedDataset ds = resolve_dataset(a.dataset, a.oracle_size);
  const std::vector<View>& views = split_of(ds.scene, a.split);
  if (views.empty()) throw ConfigError("split has no views: " + a.split);

  MetricReport report;
  for (const View& v : views) {
    const ViewRender render = render_view(bundle.field, v.camera, bundle.render);
    report.add(v.name, psnr(render.image, v.image), ssim(render.image, v.image));
  }
  report.finalize();

  fs::create_directories(a.out_dir);
  {
    std::ofstream os(fs::path(a.out_dir) / "metrics.txt");
    os << report.to_text();
  }

  Manifest m;
  m.command = "eval";
  m.args = {{"checkpoint", a.checkpoint},
            {"dataset", a.dataset},
            {"split", a.split},
            {"oracle_size", std::to_string(a.oracle_size)},
            {"input_hash", hex64(hash_dataset_spec(a.dataset) ^
                                 hash_file(a.checkpoint, 0xcbf29ce484222325ULL))}};
  m.outputs = {"metrics.txt"};
  return m;
}

struct MorphArgs {
  std::string dataset;
  int view_a = 0;
  int view_b = 1;
  std::string alphas = "0.5";
  std::string depth = "oracle";  // "oracle" or a checkpoint path
  int oracle_size = 64;
  std::string out_dir = "out";
};

Manifest run_morph(const MorphArgs& a) {
  ResolvedDataset ds = resolve_dataset(a.dataset, a.oracle_size);
  const std::vector<View>& views = ds.scene.train;
  if (a.view_a < 0 || a.view_b < 0 || a.view_a >= static_cast<int>(views.size()) ||
      a.view_b >= static_cast<int>(views.size()) || a.view_a == a.view_b) {
    throw ConfigError("invalid view pair");
  }
  const View& va = views[a.view_a];
  const View& vb = views[a.view_b];

  const PairValidity validity = pair_valid(va.camera.pose, vb.camera.pose, va.camera.intrinsics,
                                           vb.camera.intrinsics, PairFilterConfig{6.0});
  if (!validity.valid) {
    throw ConfigError(std::string("pair rejected: ") + pair_reason_name(validity.reason));
  }

  DepthMap depth_a, depth_b;
  if (a.depth == "oracle") {
    if (!va.depth || !vb.depth) {
      throw ConfigError("oracle depth requested but the dataset has no exact depths");
    }
    depth_a = *va.depth;
    depth_b = *vb.depth;
  } else {
    const CheckpointBundle bundle = load_checkpoint(a.depth);
    depth_a = predict_depth_map(bundle.field, va.camera, bundle.render, 0.5);
    depth_b = predict_depth_map(bundle.field, vb.camera, bundle.render, 0.5);
  }

  const RectifiedPair rect =
      rectify_pair(va.image, depth_a, va.camera.pose, va.camera.intrinsics, vb.image, depth_b,
                   vb.camera.pose, vb.camera.intrinsics, true);
  const ColoredPointCloud cloud_a =
      to_point_cloud(rect.view_k.image, rect.view_k.image_valid, rect.view_k.coords);
  const ColoredPointCloud cloud_b =
      to_point_cloud(rect.view_k2.image, rect.view_k2.image_valid, rect.view_k2.coords);

  fs::create_directories(a.out_dir);
  std::vector<View> morph_views;
  std::stringstream alpha_stream(a.alphas);
  std::string token;
  int index = 0;
  while (std::getline(alpha_stream, token, ',')) {
    const double alpha = std::stod(token);
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must be within [0,1]");
    const CameraPose pose = interpolate_pose(rect.warp.pose_k, rect.warp.pose_k2, alpha);
    MorphResult morph = fuse_project(cloud_a, cloud_b, pose, rect.warp.k_tilde, alpha);

    View view;
    view.name = "morph_" + std::to_string(index);
    view.image = std::move(morph.image);
    view.valid = std::move(morph.valid);
    view.camera.intrinsics = morph.k_tilde;
    view.camera.pose = morph.pose;
    morph_views.push_back(std::move(view));
    ++index;
  }
  save_transforms(a.out_dir, "morph", morph_views);

  Manifest m;
  m.command = "morph";
  m.args = {{"dataset", a.dataset},
            {"view_a", std::to_string(a.view_a)},
            {"view_b", std::to_string(a.view_b)},
            {"alphas", a.alphas},
            {"depth", a.depth},
            {"oracle_size", std::to_string(a.oracle_size)},
            {"input_hash", hex64(hash_dataset_spec(a.dataset))}};
  m.outputs = {"transforms_morph.json"};
  for (int i = 0; i < index; ++i) m.outputs.push_back("morph/r_" + std::to_string(i) + ".png");
  return m;
}

int dispatch_manifest(const Manifest& m, const std::string& out_dir) {
  auto arg = [&](const std::string& key, const std::string& fallback = "") {
    const auto it = m.args.find(key);
    return it == m.args.end() ? fallback : it->second;
  };
  if (m.command == "select-views") {
    SelectArgs a;
    a.dataset = arg("dataset");
    a.split = arg("split", "train");
    a.count = std::stoi(arg("count", "8"));
    a.seed_index = std::stoi(arg("seed_index", "0"));
    a.oracle_size = std::stoi(arg("oracle_size", "64"));
    a.out_dir = out_dir;
    run_select(a).write(fs::path(out_dir) / "manifest.txt");
    return 0;
  }
  if (m.command == "train") {
    TrainArgs a;
    a.dataset = arg("dataset");
    a.views_file = arg("views");
    a.config_file = arg("config");
    a.dvm = arg("dvm", "on");
    a.seed = std::stoull(arg("seed", "0"));
    a.oracle_size = std::stoi(arg("oracle_size", "64"));
    a.dump_morphs = arg("dump_morphs", "0") == "1";
    for (int i = 0;; ++i) {
      const std::string kv = arg("set" + std::to_string(i));
      if (kv.empty()) break;
      a.overrides.push_back(kv);
    }
    a.out_dir = out_dir;
    run_train(a).write(fs::path(out_dir) / "manifest.txt");
    return 0;
  }
  if (m.command == "eval") {
    EvalArgs a;
    a.checkpoint = arg("checkpoint");
    a.dataset = arg("dataset");
    a.split = arg("split", "test");
    a.oracle_size = std::stoi(arg("oracle_size", "64"));
    a.out_dir = out_dir;
    run_eval(a).write(fs::path(out_dir) / "manifest.txt");
    return 0;
  }
  if (m.command == "morph") {
    MorphArgs a;
    a.dataset = arg("dataset");
    a.view_a = std::stoi(arg("view_a", "0"));
    a.view_b = std::stoi(arg("view_b", "1"));
    a.alphas = arg("alphas", "0.5");
    a.depth = arg("depth", "oracle");
    a.oracle_size = std::stoi(arg("oracle_size", "64"));
    a.out_dir = out_dir;
    run_morph(a).write(fs::path(out_dir) / "manifest.txt");
    return 0;
  }
  throw ConfigError("manifest carries an unknown command: " + m.command);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"depth-driven view morphing augmentation for compact radiance fields"};
  app.require_subcommand(1);

  SelectArgs select_args;
  CLI::App* select = app.add_subcommand("select-views", "pick spread-out training views");
  select->add_option("--dataset", select_args.dataset, "scene dir, transforms json, or oracle[:N]")
      ->required();
  select->add_option("--split", select_args.split);
  select->add_option("--count,-n", select_args.count);
  select->add_option("--seed-index", select_args.seed_index);
  select->add_option("--oracle-size", select_args.oracle_size);
  select->add_option("--out", select_args.out_dir);

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "optimize a radiance field");
  train_cmd->add_option("--dataset", train_args.dataset)->required();
  train_cmd->add_option("--views", train_args.views_file, "index file from select-views");
  train_cmd->add_option("--config", train_args.config_file, "key=value config file");
  train_cmd->add_option("--set", train_args.overrides, "config overrides (key=value)");
  train_cmd->add_option("--dvm", train_args.dvm, "on|off|oracle-depth");
  train_cmd->add_option("--seed", train_args.seed);
  train_cmd->add_option("--oracle-size", train_args.oracle_size);
  train_cmd->add_flag("--dump-morphs", train_args.dump_morphs,
                      "persist the final synthesized views next to the checkpoint");
  train_cmd->add_option("--out", train_args.out_dir);

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "render a split and report metrics");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint)->required();
  eval_cmd->add_option("--dataset", eval_args.dataset)->required();
  eval_cmd->add_option("--split", eval_args.split);
  eval_cmd->add_option("--oracle-size", eval_args.oracle_size);
  eval_cmd->add_option("--out", eval_args.out_dir);

  MorphArgs morph_args;
  CLI::App* morph_cmd = app.add_subcommand("morph", "rectify and morph one view pair");
  morph_cmd->add_option("--dataset", morph_args.dataset)->required();
  morph_cmd->add_option("--view-a", morph_args.view_a)->required();
  morph_cmd->add_option("--view-b", morph_args.view_b)->required();
  morph_cmd->add_option("--alphas", morph_args.alphas, "comma-separated positions");
  morph_cmd->add_option("--depth", morph_args.depth, "oracle or a checkpoint path");
  morph_cmd->add_option("--oracle-size", morph_args.oracle_size);
  morph_cmd->add_option("--out", morph_args.out_dir);

  std::string rerun_manifest;
  std::string rerun_out = "out";
  CLI::App* rerun_cmd = app.add_subcommand("rerun", "replay a recorded manifest");
  rerun_cmd->add_option("manifest", rerun_manifest)->required();
  rerun_cmd->add_option("--out", rerun_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (select->parsed()) {
      run_select(select_args).write(fs::path(select_args.out_dir) / "manifest.txt");
    } else if (train_cmd->parsed()) {
      run_train(train_args).write(fs::path(train_args.out_dir) / "manifest.txt");
    } else if (eval_cmd->parsed()) {
      run_eval(eval_args).write(fs::path(eval_args.out_dir) / "manifest.txt");
    } else if (morph_cmd->parsed()) {
      run_morph(morph_args).write(fs::path(morph_args.out_dir) / "manifest.txt");
    } else if (rerun_cmd->parsed()) {
      return dispatch_manifest(Manifest::read(rerun_manifest), rerun_out);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const InvalidCount& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const MissingField& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
}
