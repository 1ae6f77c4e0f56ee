#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "dvm/geometry.h"
#include "dvm/image.h"
#include "dvm/rng.h"

namespace dvm {

struct InvalidRange : std::runtime_error {
  explicit InvalidRange(const std::string& what) : std::runtime_error(what) {}
};
struct ShapeMismatch : std::runtime_error {
  explicit ShapeMismatch(const std::string& what) : std::runtime_error(what) {}
};
struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

using MatXf = Eigen::MatrixXf;
using VecXf = Eigen::VectorXf;
using Mat3Xf = Eigen::Matrix3Xf;

// ---------------------------------------------------------------------------
// Encoding

// Raw input followed by sin/cos pairs at frequencies 2^0 .. 2^(degree-1).
// Output dimension is dim(x) * (2*degree + 1).
Eigen::VectorXd positional_encoding(const Eigen::VectorXd& x, int degree);

int encoding_dim(int input_dim, int degree);

// Column-wise batched float encoding used by the network path.
MatXf encode_batch(const Mat3Xf& x, int degree);

// ---------------------------------------------------------------------------
// Volume compositing (the quadrature of the rendering sum)

// c_hat = sum_i s(i) (1 - e^(-sigma_i delta_i)) c_i with s(1) = 1.
Eigen::Vector3d render_color(const std::vector<double>& sigmas,
                             const std::vector<Eigen::Vector3d>& colors,
                             const std::vector<double>& deltas);

// Same weights applied to the per-sample distances from the optic centre.
double render_depth(const std::vector<double>& sigmas, const std::vector<double>& distances,
                    const std::vector<double>& deltas);

double accumulated_opacity(const std::vector<double>& sigmas, const std::vector<double>& deltas);

// ---------------------------------------------------------------------------
// Ray sampling

// One uniform draw per bin of [t_near, t_far] split into `count` equal bins;
// null rng yields bin midpoints. Strictly increasing.
std::vector<double> sample_stratified(double t_near, double t_far, int count, Rng* rng);

// Inverse-CDF draws from the piecewise-constant density proportional to the
// coarse weights over the coarse-sample bins; falls back to stratified
// sampling when every weight is zero. Null rng uses the uniform grid
// (j + 0.5) / count.
std::vector<double> sample_hierarchical(const std::vector<double>& weights,
                                        const std::vector<double>& t_coarse, double t_near,
                                        double t_far, int count, Rng* rng);

// Ascending merge of coarse and fine sample positions.
std::vector<double> merge_samples(const std::vector<double>& a, const std::vector<double>& b);

// delta_i = t_{i+1} - t_i, with the trailing interval set to the mean bin
// width so every delta stays positive.
std::vector<double> deltas_from_samples(const std::vector<double>& t, double t_near,
                                        double t_far);

// Mean over rays of the summed squared coarse and fine errors.
double loss(const Mat3Xf& pred_coarse, const Mat3Xf& pred_fine, const Mat3Xf& gt_colors);

// ---------------------------------------------------------------------------
// The MLP

struct FieldConfig {
  int l_pos = 10;
  int l_dir = 4;
  int trunk_layers = 4;
  int hidden_dim = 128;
  int color_hidden_dim = 64;
  int gamma_coarse = 32;
  int gamma_fine = 64;
  float density_shift = 6.f;  // sigma = softplus(raw - shift)

  int pos_dim() const { return encoding_dim(3, l_pos); }
  int dir_dim() const { return encoding_dim(3, l_dir); }

  bool operator==(const FieldConfig&) const = default;
};

// Fully-connected field over (encoded position, encoded direction). All
// parameters live in one flat vector so the optimizer, checkpointing and the
// finite-difference harness can treat them uniformly.
class Mlp {
 public:
  explicit Mlp(const FieldConfig& cfg);

  void init_params(Rng& rng);
  int param_count() const { return static_cast<int>(params_.size()); }
  VecXf& params() { return params_; }
  const VecXf& params() const { return params_; }

  struct Cache {
    MatXf pos_enc;
    MatXf dir_enc;
    std::vector<MatXf> trunk;  // post-activation
    Eigen::RowVectorXf sigma_raw;
    MatXf color_in;
    MatXf color_hidden;  // post-activation
    MatXf rgb_raw;
  };

  // Layer order: trunk layers, sigma head, color hidden, color out.
  int layer_count() const { return static_cast<int>(layers_.size()); }
  Eigen::Map<MatXf> weights(int layer) {
    const LayerView& l = layers_[layer];
    return Eigen::Map<MatXf>(params_.data() + l.w_offset, l.rows, l.cols);
  }
  Eigen::Map<VecXf> bias(int layer) {
    const LayerView& l = layers_[layer];
    return Eigen::Map<VecXf>(params_.data() + l.b_offset, l.rows);
  }

  // sigma: N, rgb: 3 x N. `cache` may be null when no backward pass follows.
  void forward(const MatXf& pos_enc, const MatXf& dir_enc, VecXf* sigma, Mat3Xf* rgb,
               Cache* cache) const;

  // Accumulates parameter gradients given dL/dsigma and dL/drgb.
  void backward(const Cache& cache, const VecXf& d_sigma, const Mat3Xf& d_rgb,
                VecXf* grad) const;

 private:
  struct LayerView {
    int w_offset;
    int b_offset;
    int rows;
    int cols;
  };

  LayerView trunk_layer(int i) const { return layers_[i]; }

  FieldConfig cfg_;
  std::vector<LayerView> layers_;  // trunk..., sigma_head, color_hidden, color_out
  VecXf params_;

  friend class RadianceField;
};

class RadianceField {
 public:
  RadianceField(const FieldConfig& cfg, uint64_t seed);

  const FieldConfig& config() const { return cfg_; }
  Mlp& coarse() { return coarse_; }
  const Mlp& coarse() const { return coarse_; }
  Mlp& fine() { return fine_; }
  const Mlp& fine() const { return fine_; }

  void save(const std::string& path) const;
  void save(std::ostream& os) const;
  static RadianceField load(const std::string& path);
  static RadianceField load(std::istream& is);

 private:
  FieldConfig cfg_;
  Mlp coarse_;
  Mlp fine_;
};

// ---------------------------------------------------------------------------
// Rendering

struct RayBatch {
  Mat3Xf origins;  // 3 x R
  Mat3Xf dirs;     // 3 x R, unit norm

  int count() const { return static_cast<int>(origins.cols()); }
};

struct RenderParams {
  double t_near = 2.0;
  double t_far = 6.0;
  std::array<float, 3> background = {1.f, 1.f, 1.f};
};

struct BatchRender {
  Mat3Xf color_coarse;
  Mat3Xf color_fine;
  VecXf depth_fine;
  VecXf opacity_fine;
};

// Renders a batch of rays through the coarse and fine passes. Null rng makes
// sampling deterministic (midpoints + uniform inverse-CDF grid).
BatchRender render_rays(const RadianceField& field, const RayBatch& rays,
                        const RenderParams& params, Rng* rng);

struct ViewRender {
  Image image;
  DepthMap depth;               // valid everywhere; threshold separately
  std::vector<float> opacity;   // per pixel
};

// Full-frame deterministic render (no rng) of the fine pass.
ViewRender render_view(const RadianceField& field, const CameraModel& camera,
                       const RenderParams& params);

// Fine-pass depth with pixels below the opacity threshold masked invalid.
DepthMap predict_depth_map(const RadianceField& field, const CameraModel& camera,
                           const RenderParams& params, double opacity_threshold);

// Unit ray through an integer pixel.
void camera_ray(const CameraModel& camera, int x, int y, Eigen::Vector3f* origin,
                Eigen::Vector3f* dir);

// ---------------------------------------------------------------------------
// Training step

struct Adam {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  VecXf m;
  VecXf v;
  int64_t t = 0;

  void step(VecXf& params, const VecXf& grad, float lr);
};

// Renders the batch with gradients and accumulates dLoss/dparams for both
// networks. Returns the batch loss.
double loss_and_gradients(const RadianceField& field, const RayBatch& rays, const Mat3Xf& gt,
                          const RenderParams& params, Rng* rng, VecXf* grad_coarse,
                          VecXf* grad_fine);

// Ray-major flattened sample distances for both passes. The fine positions
// are treated as constants of the loss (importance sampling is not
// differentiated through), which is what makes frozen-sample finite
// differences comparable with the analytic gradients.
struct SampleSet {
  std::vector<double> coarse;  // rays * gamma_coarse
  std::vector<double> fine;    // rays * (gamma_coarse + gamma_fine)
};

SampleSet draw_sample_set(const RadianceField& field, const RayBatch& rays,
                          const RenderParams& params, Rng* rng);

// Loss (and optional gradients) at fixed sample positions.
double loss_with_samples(const RadianceField& field, const RayBatch& rays, const Mat3Xf& gt,
                         const RenderParams& params, const SampleSet& samples,
                         VecXf* grad_coarse, VecXf* grad_fine);

}  // namespace dvm
