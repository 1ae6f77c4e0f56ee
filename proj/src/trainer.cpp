#include "dvm/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>

#include "dvm/metrics.h"
#include "dvm/rectify.h"

namespace dvm {

const char* dvm_mode_name(DvmMode mode) {
  switch (mode) {
    case DvmMode::Off: return "off";
    case DvmMode::On: return "on";
    case DvmMode::OracleDepth: return "oracle-depth";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (total_iters < 1) throw ConfigError("total_iters must be >= 1");
  if (lambda_warmup < 1) throw ConfigError("lambda_warmup must be >= 1");
  if (lambda_warmup > total_iters) {
    throw ConfigError("lambda_warmup must not exceed total_iters");
  }
  if (eta_regen < 1) throw ConfigError("eta_regen must be >= 1");
  if (m_views_per_pair < 0) throw ConfigError("m_views_per_pair must be >= 0");
  if (gamma_distance <= 0) throw ConfigError("gamma_distance must be > 0");
  if (sigma_alpha <= 0) throw ConfigError("sigma_alpha must be > 0");
  if (batch_rays < 1) throw ConfigError("batch_rays must be >= 1");
  if (!(t_near < t_far)) throw ConfigError("t_near must be < t_far");
  if (field.gamma_coarse < 2 || field.gamma_fine < 1) {
    throw ConfigError("sample counts too small");
  }
}

size_t AugmentedPool::morph_count() const {
  size_t n = 0;
  for (const auto& group : morphs) n += group.size();
  return n;
}

std::vector<std::pair<int, int>> enumerate_valid_pairs(const std::vector<CameraModel>& cameras,
                                                       const PairFilterConfig& cfg) {
  std::vector<std::pair<int, int>> pairs;
  for (size_t i = 0; i < cameras.size(); ++i) {
    for (size_t j = i + 1; j < cameras.size(); ++j) {
      const PairValidity v = pair_valid(cameras[i].pose, cameras[j].pose,
                                        cameras[i].intrinsics, cameras[j].intrinsics, cfg);
      if (v.valid) pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  }
  return pairs;
}

void regenerate_views(const RadianceField& field, const std::vector<View>& views,
                      const std::vector<std::pair<int, int>>& pairs, const TrainConfig& cfg,
                      Rng& alpha_rng, int iter, AugmentedPool* pool,
                      std::vector<std::string>* notes) {
  if (iter < cfg.lambda_warmup) return;
  pool->morphs.assign(pairs.size(), {});

  RenderParams render_params;
  render_params.t_near = cfg.t_near;
  render_params.t_far = cfg.t_far;

  // Each view participates in several pairs; predict its depth once per cycle.
  std::vector<std::optional<DepthMap>> depth_cache(views.size());
  auto view_depth = [&](int idx) -> const DepthMap& {
    if (!depth_cache[idx]) {
      if (cfg.dvm == DvmMode::OracleDepth) {
        if (!views[idx].depth) throw ConfigError("oracle-depth morphing needs dataset depths");
        depth_cache[idx] = *views[idx].depth;
      } else {
        depth_cache[idx] =
            predict_depth_map(field, views[idx].camera, render_params, cfg.opacity_threshold);
      }
    }
    return *depth_cache[idx];
  };

  for (size_t pi = 0; pi < pairs.size(); ++pi) {
    const auto [a, b] = pairs[pi];
    const View& view_a = views[a];
    const View& view_b = views[b];

    try {
      const DepthMap& depth_a = view_depth(a);
      const DepthMap& depth_b = view_depth(b);

      const RectifiedPair rect = rectify_pair(
          view_a.image, depth_a, view_a.camera.pose, view_a.camera.intrinsics, view_b.image,
          depth_b, view_b.camera.pose, view_b.camera.intrinsics, cfg.recentre_rectified);

      const ColoredPointCloud cloud_a =
          to_point_cloud(rect.view_k.image, rect.view_k.image_valid, rect.view_k.coords);
      const ColoredPointCloud cloud_b =
          to_point_cloud(rect.view_k2.image, rect.view_k2.image_valid, rect.view_k2.coords);

      for (int m = 0; m < cfg.m_views_per_pair; ++m) {
        const double alpha = sample_alpha(alpha_rng, cfg.sigma_alpha);
        const CameraPose pose =
            interpolate_pose(rect.warp.pose_k, rect.warp.pose_k2, alpha);
        MorphResult morph = fuse_project(cloud_a, cloud_b, pose, rect.warp.k_tilde, alpha);

        PoolView pv;
        pv.image = std::move(morph.image);
        pv.valid = std::move(morph.valid);
        pv.camera.intrinsics = morph.k_tilde;
        pv.camera.pose = morph.pose;
        pv.is_morph = true;
        pv.pair_id = static_cast<int>(pi);
        pv.generation = iter;
        pv.alpha = alpha;
        pool->morphs[pi].push_back(std::move(pv));
      }
    } catch (const std::exception& e) {
      if (notes) {
        std::ostringstream os;
        os << "pair (" << a << "," << b << ") skipped at iter " << iter << ": " << e.what();
        notes->push_back(os.str());
      }
    }
  }
}

namespace {

struct PixelIndex {
  const PoolView* view;
  int x;
  int y;
};

std::vector<PixelIndex> build_pixel_index(const AugmentedPool& pool) {
  std::vector<PixelIndex> index;
  auto add_view = [&](const PoolView& v) {
    for (int y = 0; y < v.image.height; ++y) {
      for (int x = 0; x < v.image.width; ++x) {
        if (v.valid.at(x, y)) index.push_back({&v, x, y});
      }
    }
  };
  for (const PoolView& v : pool.real) add_view(v);
  for (const auto& group : pool.morphs) {
    for (const PoolView& v : group) add_view(v);
  }
  return index;
}

void rays_from_pixels(const std::vector<PixelIndex>& pixels, const std::vector<size_t>& chosen,
                      RayBatch* rays, Mat3Xf* gt) {
  const int n = static_cast<int>(chosen.size());
  rays->origins.resize(3, n);
  rays->dirs.resize(3, n);
  gt->resize(3, n);
  for (int i = 0; i < n; ++i) {
    const PixelIndex& px = pixels[chosen[i]];
    Eigen::Vector3f o, d;
    camera_ray(px.view->camera, px.x, px.y, &o, &d);
    rays->origins.col(i) = o;
    rays->dirs.col(i) = d;
    const float* rgb = px.view->image.at(px.x, px.y);
    (*gt)(0, i) = rgb[0];
    (*gt)(1, i) = rgb[1];
    (*gt)(2, i) = rgb[2];
  }
}

}  // namespace

void sample_ray_batch(const AugmentedPool& pool, int batch, Rng& rng, RayBatch* rays,
                      Mat3Xf* gt_colors) {
  const std::vector<PixelIndex> pixels = build_pixel_index(pool);
  if (pixels.empty()) throw ConfigError("no valid pixels to sample from");
  std::vector<size_t> chosen(batch);
  for (int i = 0; i < batch; ++i) chosen[i] = rng.below(pixels.size());
  rays_from_pixels(pixels, chosen, rays, gt_colors);
}

TrainResult train(const std::vector<View>& train_views, const std::vector<View>& heldout_views,
                  const std::array<float, 3>& background, const TrainConfig& cfg) {
  cfg.validate();
  if (train_views.empty()) throw ConfigError("no training views");

  std::ostringstream log;
  log << "# training log\n";
  log << "dvm=" << dvm_mode_name(cfg.dvm) << " gamma=" << cfg.gamma_distance
      << " sigma=" << cfg.sigma_alpha << " M=" << cfg.m_views_per_pair
      << " eta=" << cfg.eta_regen << " lambda=" << cfg.lambda_warmup << "\n";
  log << "iters=" << cfg.total_iters << " batch=" << cfg.batch_rays << " seed=" << cfg.seed
      << " views=" << train_views.size() << " heldout=" << heldout_views.size() << "\n";

  RenderParams render_params;
  render_params.t_near = cfg.t_near;
  render_params.t_far = cfg.t_far;
  render_params.background = background;

  TrainResult result{RadianceField(cfg.field, cfg.seed), {}, "", {}, {}};
  Rng master(cfg.seed);
  Rng rng_batch = master.fork(10);
  Rng rng_jitter = master.fork(11);
  Rng rng_alpha = master.fork(12);

  AugmentedPool pool;
  for (const View& v : train_views) {
    PoolView pv;
    pv.image = v.image;
    pv.valid = v.valid;
    pv.camera = v.camera;
    pool.real.push_back(std::move(pv));
  }

  const bool dvm_enabled = cfg.dvm != DvmMode::Off && cfg.m_views_per_pair > 0;
  std::vector<CameraModel> cameras;
  for (const View& v : train_views) cameras.push_back(v.camera);
  if (dvm_enabled) {
    result.valid_pairs = enumerate_valid_pairs(cameras, PairFilterConfig{cfg.gamma_distance});
    log << "valid_pairs=" << result.valid_pairs.size() << "\n";
  }

  std::vector<PixelIndex> pixels = build_pixel_index(pool);
  Adam adam_coarse, adam_fine;
  VecXf grad_coarse, grad_fine;
  std::vector<std::string> notes;
  double last_loss = 0.0;

  auto eval_psnr = [&]() {
    if (heldout_views.empty()) return 0.0;
    double acc = 0.0;
    for (const View& v : heldout_views) {
      const ViewRender render = render_view(result.field, v.camera, render_params);
      acc += psnr(render.image, v.image);
    }
    return acc / double(heldout_views.size());
  };

  for (int iter = 1; iter <= cfg.total_iters; ++iter) {
    if (dvm_enabled && iter > cfg.lambda_warmup &&
        (iter - cfg.lambda_warmup - 1) % cfg.eta_regen == 0) {
      regenerate_views(result.field, train_views, result.valid_pairs, cfg, rng_alpha, iter,
                       &pool, &notes);
      pixels = build_pixel_index(pool);
      log << "iter=" << iter << " regenerated morphs=" << pool.morph_count() << "\n";
    }

    RayBatch rays;
    Mat3Xf gt;
    std::vector<size_t> chosen(cfg.batch_rays);
    for (int i = 0; i < cfg.batch_rays; ++i) chosen[i] = rng_batch.below(pixels.size());
    rays_from_pixels(pixels, chosen, &rays, &gt);

    last_loss = loss_and_gradients(result.field, rays, gt, render_params, &rng_jitter,
                                   &grad_coarse, &grad_fine);

    const float lr = cfg.lr * std::pow(cfg.lr_final / cfg.lr,
                                       static_cast<float>(iter) / cfg.total_iters);
    adam_coarse.step(result.field.coarse().params(), grad_coarse, lr);
    adam_fine.step(result.field.fine().params(), grad_fine, lr);

    if (iter % cfg.eval_every == 0 || iter == cfg.total_iters) {
      EvalRecord rec;
      rec.iter = iter;
      rec.loss = last_loss;
      rec.psnr = eval_psnr();
      rec.real_views = pool.real.size();
      rec.morph_views = pool.morph_count();
      result.log.push_back(rec);
      log << "iter=" << iter << " loss=" << last_loss << " psnr=" << rec.psnr
          << " real=" << rec.real_views << " morphs=" << rec.morph_views << "\n";
    }
  }

  for (const std::string& note : notes) log << "note: " << note << "\n";
  result.log_text = log.str();
  result.final_pool = std::move(pool);
  return result;
}

namespace {
constexpr char kBundleMagic[8] = {'D', 'V', 'M', 'B', '0', '0', '0', '1'};
}

void save_checkpoint(const std::string& path, const RadianceField& field,
                     const RenderParams& render) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot open checkpoint for writing: " + path);
  os.write(kBundleMagic, sizeof(kBundleMagic));
  const double bounds[2] = {render.t_near, render.t_far};
  os.write(reinterpret_cast<const char*>(bounds), sizeof(bounds));
  os.write(reinterpret_cast<const char*>(render.background.data()), sizeof(float) * 3);
  field.save(os);
  if (!os) throw CheckpointError("failed writing checkpoint: " + path);
}

CheckpointBundle load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kBundleMagic, sizeof(magic)) != 0) {
    throw CheckpointError("bad checkpoint header (version mismatch?): " + path);
  }
  RenderParams render;
  double bounds[2];
  is.read(reinterpret_cast<char*>(bounds), sizeof(bounds));
  is.read(reinterpret_cast<char*>(render.background.data()), sizeof(float) * 3);
  if (!is) throw CheckpointError("truncated checkpoint: " + path);
  render.t_near = bounds[0];
  render.t_far = bounds[1];
  return CheckpointBundle{RadianceField::load(is), render};
}

}  // namespace dvm
