#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dvm/data.h"
#include "dvm/field.h"
#include "dvm/morph.h"

namespace dvm {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class DvmMode { Off, On, OracleDepth };

const char* dvm_mode_name(DvmMode mode);

struct TrainConfig {
  int total_iters = 3000;
  int lambda_warmup = 500;   // iterations before the first morph generation
  int eta_regen = 600;       // morph regeneration period
  int m_views_per_pair = 1;  // M
  double gamma_distance = 6.0;
  double sigma_alpha = 0.2;
  int batch_rays = 1024;
  float lr = 5e-4f;
  float lr_final = 5e-5f;
  uint64_t seed = 0;
  int eval_every = 1000;
  double t_near = 2.0;
  double t_far = 6.0;
  double opacity_threshold = 0.5;
  bool recentre_rectified = true;
  DvmMode dvm = DvmMode::On;
  FieldConfig field;

  void validate() const;
};

// A trainable view in the pool. Morphed views are replaced wholesale at each
// regeneration; real views never change.
struct PoolView {
  Image image;
  Mask valid;
  CameraModel camera;
  bool is_morph = false;
  int pair_id = -1;
  int generation = 0;
  double alpha = 0.0;
};

struct AugmentedPool {
  std::vector<PoolView> real;
  std::vector<std::vector<PoolView>> morphs;  // indexed by pair id

  size_t morph_count() const;
  size_t view_count() const { return real.size() + morph_count(); }
};

struct EvalRecord {
  int iter = 0;
  double loss = 0.0;
  double psnr = 0.0;
  size_t real_views = 0;
  size_t morph_views = 0;
};

struct TrainResult {
  RadianceField field;
  std::vector<EvalRecord> log;
  std::string log_text;
  std::vector<std::pair<int, int>> valid_pairs;
  AugmentedPool final_pool;
};

// All unordered view pairs that pass the distance and singularity filters,
// in lexicographic order.
std::vector<std::pair<int, int>> enumerate_valid_pairs(const std::vector<CameraModel>& cameras,
                                                       const PairFilterConfig& cfg);

// Re-synthesizes M morphed views per valid pair from the current field (or
// the exact dataset depths in OracleDepth mode), replacing the previous
// generation. No-op before the warmup boundary. Pairs whose rectification
// degenerates are skipped and noted in `notes`.
void regenerate_views(const RadianceField& field, const std::vector<View>& views,
                      const std::vector<std::pair<int, int>>& pairs, const TrainConfig& cfg,
                      Rng& alpha_rng, int iter, AugmentedPool* pool,
                      std::vector<std::string>* notes);

// Uniform draw over every valid pixel across all pool views.
void sample_ray_batch(const AugmentedPool& pool, int batch, Rng& rng, RayBatch* rays,
                      Mat3Xf* gt_colors);

TrainResult train(const std::vector<View>& train_views, const std::vector<View>& heldout_views,
                  const std::array<float, 3>& background, const TrainConfig& cfg);

// Checkpoint file: the field parameters plus the render bounds and background
// they were trained with, so evaluation needs nothing but the file.
struct CheckpointBundle {
  RadianceField field;
  RenderParams render;
};

void save_checkpoint(const std::string& path, const RadianceField& field,
                     const RenderParams& render);
CheckpointBundle load_checkpoint(const std::string& path);

}  // namespace dvm
