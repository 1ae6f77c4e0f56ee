#include "dvm/field.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace dvm {
namespace {

constexpr char kCheckpointMagic[8] = {'D', 'V', 'M', 'F', '0', '0', '0', '1'};

float softplus(float x) {
  if (x > 20.f) return x;
  if (x < -20.f) return std::exp(x);
  return std::log1p(std::exp(x));
}

float sigmoid(float x) { return 1.f / (1.f + std::exp(-x)); }

}  // namespace

// ---------------------------------------------------------------------------
// Encoding

int encoding_dim(int input_dim, int degree) { return input_dim * (2 * degree + 1); }

Eigen::VectorXd positional_encoding(const Eigen::VectorXd& x, int degree) {
  const int dim = static_cast<int>(x.size());
  Eigen::VectorXd out(encoding_dim(dim, degree));
  out.head(dim) = x;
  int offset = dim;
  double freq = 1.0;
  for (int level = 0; level < degree; ++level) {
    for (int c = 0; c < dim; ++c) out[offset + c] = std::sin(freq * x[c]);
    offset += dim;
    for (int c = 0; c < dim; ++c) out[offset + c] = std::cos(freq * x[c]);
    offset += dim;
    freq *= 2.0;
  }
  return out;
}

MatXf encode_batch(const Mat3Xf& x, int degree) {
  const int n = static_cast<int>(x.cols());
  MatXf out(encoding_dim(3, degree), n);
  out.topRows(3) = x;
  float freq = 1.f;
  for (int level = 0; level < degree; ++level) {
    const int row = 3 + 6 * level;
    out.middleRows(row, 3) = (x * freq).array().sin();
    out.middleRows(row + 3, 3) = (x * freq).array().cos();
    freq *= 2.f;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Compositing

namespace {

void check_composite_shapes(size_t sigmas, size_t values, size_t deltas) {
  if (sigmas != values || sigmas != deltas) {
    throw ShapeMismatch("compositing inputs disagree in length");
  }
}

}  // namespace

Eigen::Vector3d render_color(const std::vector<double>& sigmas,
                             const std::vector<Eigen::Vector3d>& colors,
                             const std::vector<double>& deltas) {
  check_composite_shapes(sigmas.size(), colors.size(), deltas.size());
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  double trans = 1.0;
  for (size_t i = 0; i < sigmas.size(); ++i) {
    const double att = std::exp(-sigmas[i] * deltas[i]);
    acc += trans * (1.0 - att) * colors[i];
    trans *= att;
  }
  return acc;
}

double render_depth(const std::vector<double>& sigmas, const std::vector<double>& distances,
                    const std::vector<double>& deltas) {
  check_composite_shapes(sigmas.size(), distances.size(), deltas.size());
  double acc = 0.0;
  double trans = 1.0;
  for (size_t i = 0; i < sigmas.size(); ++i) {
    const double att = std::exp(-sigmas[i] * deltas[i]);
    acc += trans * (1.0 - att) * distances[i];
    trans *= att;
  }
  return acc;
}

double accumulated_opacity(const std::vector<double>& sigmas, const std::vector<double>& deltas) {
  check_composite_shapes(sigmas.size(), sigmas.size(), deltas.size());
  double trans = 1.0;
  for (size_t i = 0; i < sigmas.size(); ++i) trans *= std::exp(-sigmas[i] * deltas[i]);
  return 1.0 - trans;
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<double> sample_stratified(double t_near, double t_far, int count, Rng* rng) {
  if (!(t_near < t_far) || count < 1) {
    throw InvalidRange("sample_stratified: need t_near < t_far and count >= 1");
  }
  std::vector<double> t(count);
  const double bin = (t_far - t_near) / count;
  for (int i = 0; i < count; ++i) {
    const double u = rng ? rng->uniform() : 0.5;
    t[i] = t_near + (i + u) * bin;
  }
  return t;
}

std::vector<double> sample_hierarchical(const std::vector<double>& weights,
                                        const std::vector<double>& t_coarse, double t_near,
                                        double t_far, int count, Rng* rng) {
  if (weights.size() != t_coarse.size()) {
    throw ShapeMismatch("sample_hierarchical: weights/samples length mismatch");
  }
  double total = 0.0;
  for (double w : weights) {
    if (w < 0) throw InvalidRange("sample_hierarchical: negative weight");
    total += w;
  }
  if (total <= 0.0) return sample_stratified(t_near, t_far, count, rng);

  // Bin edges: t_near, midpoints between coarse samples, t_far.
  const size_t bins = weights.size();
  std::vector<double> edges(bins + 1);
  edges[0] = t_near;
  for (size_t i = 1; i < bins; ++i) edges[i] = 0.5 * (t_coarse[i - 1] + t_coarse[i]);
  edges[bins] = t_far;

  std::vector<double> cdf(bins + 1, 0.0);
  for (size_t i = 0; i < bins; ++i) cdf[i + 1] = cdf[i] + weights[i] / total;
  cdf[bins] = 1.0;

  std::vector<double> out(count);
  for (int j = 0; j < count; ++j) {
    const double u = rng ? rng->uniform() : (j + 0.5) / count;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    size_t hi = std::min<size_t>(std::distance(cdf.begin(), it), bins);
    if (hi == 0) hi = 1;
    const size_t lo = hi - 1;
    const double span = cdf[hi] - cdf[lo];
    const double frac = span > 0 ? (u - cdf[lo]) / span : 0.5;
    out[j] = edges[lo] + frac * (edges[hi] - edges[lo]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> merge_samples(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<double> deltas_from_samples(const std::vector<double>& t, double t_near,
                                        double t_far) {
  std::vector<double> d(t.size());
  for (size_t i = 0; i + 1 < t.size(); ++i) d[i] = std::max(t[i + 1] - t[i], 1e-9);
  if (!t.empty()) d.back() = (t_far - t_near) / static_cast<double>(t.size());
  return d;
}

double loss(const Mat3Xf& pred_coarse, const Mat3Xf& pred_fine, const Mat3Xf& gt_colors) {
  if (pred_coarse.cols() != gt_colors.cols() || pred_fine.cols() != gt_colors.cols()) {
    throw ShapeMismatch("loss: batch sizes disagree");
  }
  double acc = 0.0;
  for (int r = 0; r < gt_colors.cols(); ++r) {
    acc += (gt_colors.col(r) - pred_coarse.col(r)).cast<double>().squaredNorm();
    acc += (gt_colors.col(r) - pred_fine.col(r)).cast<double>().squaredNorm();
  }
  return acc / static_cast<double>(gt_colors.cols());
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(const FieldConfig& cfg) : cfg_(cfg) {
  int offset = 0;
  auto push = [&](int rows, int cols) {
    layers_.push_back({offset, offset + rows * cols, rows, cols});
    offset += rows * cols + rows;
  };
  for (int i = 0; i < cfg.trunk_layers; ++i) {
    push(cfg.hidden_dim, i == 0 ? cfg.pos_dim() : cfg.hidden_dim);
  }
  push(1, cfg.hidden_dim);                                      // sigma head
  push(cfg.color_hidden_dim, cfg.hidden_dim + cfg.dir_dim());   // color hidden
  push(3, cfg.color_hidden_dim);                                // color out
  params_ = VecXf::Zero(offset);
}

void Mlp::init_params(Rng& rng) {
  for (const LayerView& l : layers_) {
    const float scale = std::sqrt(6.0f / static_cast<float>(l.rows + l.cols));
    for (int i = 0; i < l.rows * l.cols; ++i) {
      params_[l.w_offset + i] = static_cast<float>(rng.uniform(-scale, scale));
    }
    for (int i = 0; i < l.rows; ++i) params_[l.b_offset + i] = 0.f;
  }
}

namespace {

using ConstMat = Eigen::Map<const MatXf>;
using ConstVec = Eigen::Map<const VecXf>;
using MutMat = Eigen::Map<MatXf>;
using MutVec = Eigen::Map<VecXf>;

}  // namespace

void Mlp::forward(const MatXf& pos_enc, const MatXf& dir_enc, VecXf* sigma, Mat3Xf* rgb,
                  Cache* cache) const {
  const int n = static_cast<int>(pos_enc.cols());
  if (pos_enc.rows() != cfg_.pos_dim() || dir_enc.rows() != cfg_.dir_dim() ||
      dir_enc.cols() != n) {
    throw ShapeMismatch("Mlp::forward: encoding shapes disagree with the config");
  }
  const float* p = params_.data();

  if (cache) {
    cache->pos_enc = pos_enc;
    cache->dir_enc = dir_enc;
    cache->trunk.clear();
  }

  MatXf h = pos_enc;
  for (int i = 0; i < cfg_.trunk_layers; ++i) {
    const LayerView l = layers_[i];
    ConstMat w(p + l.w_offset, l.rows, l.cols);
    ConstVec b(p + l.b_offset, l.rows);
    MatXf next = (w * h).colwise() + b;
    next = next.cwiseMax(0.f);
    h = std::move(next);
    if (cache) cache->trunk.push_back(h);
  }

  const LayerView ls = layers_[cfg_.trunk_layers];
  ConstMat ws(p + ls.w_offset, ls.rows, ls.cols);
  ConstVec bs(p + ls.b_offset, ls.rows);
  Eigen::RowVectorXf sigma_raw = (ws * h).row(0);
  sigma_raw.array() += bs[0];

  MatXf color_in(cfg_.hidden_dim + cfg_.dir_dim(), n);
  color_in.topRows(cfg_.hidden_dim) = h;
  color_in.bottomRows(cfg_.dir_dim()) = dir_enc;

  const LayerView lc = layers_[cfg_.trunk_layers + 1];
  ConstMat wc(p + lc.w_offset, lc.rows, lc.cols);
  ConstVec bc(p + lc.b_offset, lc.rows);
  MatXf g = ((wc * color_in).colwise() + bc).cwiseMax(0.f);

  const LayerView lo = layers_[cfg_.trunk_layers + 2];
  ConstMat wo(p + lo.w_offset, lo.rows, lo.cols);
  ConstVec bo(p + lo.b_offset, lo.rows);
  MatXf rgb_raw = (wo * g).colwise() + bo;

  if (sigma) {
    sigma->resize(n);
    for (int i = 0; i < n; ++i) (*sigma)[i] = softplus(sigma_raw[i] - cfg_.density_shift);
  }
  if (rgb) {
    rgb->resize(3, n);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c) (*rgb)(c, i) = sigmoid(rgb_raw(c, i));
    }
  }
  if (cache) {
    cache->sigma_raw = std::move(sigma_raw);
    cache->color_in = std::move(color_in);
    cache->color_hidden = std::move(g);
    cache->rgb_raw = std::move(rgb_raw);
  }
}

void Mlp::backward(const Cache& cache, const VecXf& d_sigma, const Mat3Xf& d_rgb,
                   VecXf* grad) const {
  const int n = static_cast<int>(cache.pos_enc.cols());
  if (grad->size() != params_.size()) {
    throw ShapeMismatch("Mlp::backward: gradient buffer size mismatch");
  }
  const float* p = params_.data();
  float* g = grad->data();

  // rgb = sigmoid(rgb_raw)
  MatXf d_rgb_raw(3, n);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const float s = sigmoid(cache.rgb_raw(c, i));
      d_rgb_raw(c, i) = d_rgb(c, i) * s * (1.f - s);
    }
  }

  const LayerView lo = layers_[cfg_.trunk_layers + 2];
  {
    MutMat dw(g + lo.w_offset, lo.rows, lo.cols);
    MutVec db(g + lo.b_offset, lo.rows);
    dw.noalias() += d_rgb_raw * cache.color_hidden.transpose();
    db.noalias() += d_rgb_raw.rowwise().sum();
  }
  ConstMat wo(p + lo.w_offset, lo.rows, lo.cols);
  MatXf d_g = wo.transpose() * d_rgb_raw;
  d_g = (cache.color_hidden.array() > 0.f).select(d_g, 0.f);

  const LayerView lc = layers_[cfg_.trunk_layers + 1];
  {
    MutMat dw(g + lc.w_offset, lc.rows, lc.cols);
    MutVec db(g + lc.b_offset, lc.rows);
    dw.noalias() += d_g * cache.color_in.transpose();
    db.noalias() += d_g.rowwise().sum();
  }
  ConstMat wc(p + lc.w_offset, lc.rows, lc.cols);
  MatXf d_color_in = wc.transpose() * d_g;

  // sigma = softplus(sigma_raw - shift)
  Eigen::RowVectorXf d_sigma_raw(n);
  for (int i = 0; i < n; ++i) {
    d_sigma_raw[i] = d_sigma[i] * sigmoid(cache.sigma_raw[i] - cfg_.density_shift);
  }

  const MatXf& h_last = cfg_.trunk_layers > 0 ? cache.trunk.back() : cache.pos_enc;
  const LayerView ls = layers_[cfg_.trunk_layers];
  {
    MutMat dw(g + ls.w_offset, ls.rows, ls.cols);
    MutVec db(g + ls.b_offset, ls.rows);
    dw.row(0).noalias() += d_sigma_raw * h_last.transpose();
    db[0] += d_sigma_raw.sum();
  }
  ConstMat ws(p + ls.w_offset, ls.rows, ls.cols);

  MatXf d_h = d_color_in.topRows(cfg_.hidden_dim);
  d_h.noalias() += ws.transpose() * MatXf(d_sigma_raw);

  for (int i = cfg_.trunk_layers - 1; i >= 0; --i) {
    d_h = (cache.trunk[i].array() > 0.f).select(d_h, 0.f);
    const MatXf& input = i == 0 ? cache.pos_enc : cache.trunk[i - 1];
    const LayerView l = layers_[i];
    {
      MutMat dw(g + l.w_offset, l.rows, l.cols);
      MutVec db(g + l.b_offset, l.rows);
      dw.noalias() += d_h * input.transpose();
      db.noalias() += d_h.rowwise().sum();
    }
    if (i > 0) {
      ConstMat w(p + l.w_offset, l.rows, l.cols);
      d_h = w.transpose() * d_h;
    }
  }
}

// ---------------------------------------------------------------------------
// RadianceField + checkpoints

RadianceField::RadianceField(const FieldConfig& cfg, uint64_t seed)
    : cfg_(cfg), coarse_(cfg), fine_(cfg) {
  Rng rng(seed);
  Rng rc = rng.fork(1);
  Rng rf = rng.fork(2);
  coarse_.init_params(rc);
  fine_.init_params(rf);
}

namespace {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw CheckpointError("truncated checkpoint");
  return v;
}

}  // namespace

void RadianceField::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot open checkpoint for writing: " + path);
  save(os);
  if (!os) throw CheckpointError("failed writing checkpoint: " + path);
}

void RadianceField::save(std::ostream& os) const {
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_pod<int32_t>(os, cfg_.l_pos);
  write_pod<int32_t>(os, cfg_.l_dir);
  write_pod<int32_t>(os, cfg_.trunk_layers);
  write_pod<int32_t>(os, cfg_.hidden_dim);
  write_pod<int32_t>(os, cfg_.color_hidden_dim);
  write_pod<int32_t>(os, cfg_.gamma_coarse);
  write_pod<int32_t>(os, cfg_.gamma_fine);
  write_pod<float>(os, cfg_.density_shift);
  for (const Mlp* net : {&coarse_, &fine_}) {
    write_pod<int64_t>(os, net->param_count());
    os.write(reinterpret_cast<const char*>(net->params().data()),
             sizeof(float) * net->param_count());
  }
  if (!os) throw CheckpointError("failed writing checkpoint stream");
}

RadianceField RadianceField::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint: " + path);
  return load(is);
}

RadianceField RadianceField::load(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw CheckpointError("bad checkpoint magic (version mismatch?)");
  }
  FieldConfig cfg;
  cfg.l_pos = read_pod<int32_t>(is);
  cfg.l_dir = read_pod<int32_t>(is);
  cfg.trunk_layers = read_pod<int32_t>(is);
  cfg.hidden_dim = read_pod<int32_t>(is);
  cfg.color_hidden_dim = read_pod<int32_t>(is);
  cfg.gamma_coarse = read_pod<int32_t>(is);
  cfg.gamma_fine = read_pod<int32_t>(is);
  cfg.density_shift = read_pod<float>(is);

  RadianceField field(cfg, 0);
  for (Mlp* net : {&field.coarse_, &field.fine_}) {
    const int64_t count = read_pod<int64_t>(is);
    if (count != net->param_count()) throw CheckpointError("parameter count mismatch");
    is.read(reinterpret_cast<char*>(net->params().data()), sizeof(float) * count);
    if (!is) throw CheckpointError("truncated checkpoint parameters");
  }
  return field;
}

// ---------------------------------------------------------------------------
// Ray rendering

namespace {

struct PassOutput {
  Mat3Xf color;   // composited, background included
  VecXf depth;    // expected distance
  VecXf opacity;  // 1 - T_end
  // Per-sample products kept for the backward pass and hierarchical sampling.
  VecXf sigma;
  Mat3Xf rgb;
  std::vector<float> weights;
  std::vector<float> trans_next;
};

// Evaluates one network over fixed per-ray sample positions.
void run_pass(const Mlp& net, const FieldConfig& cfg, const RayBatch& rays,
              const std::vector<double>& ts, int spr, const RenderParams& params,
              PassOutput* out, Mlp::Cache* cache) {
  const int n_rays = rays.count();
  const int n = n_rays * spr;

  Mat3Xf points(3, n);
  Mat3Xf dirs(3, n);
  for (int r = 0; r < n_rays; ++r) {
    const Eigen::Vector3f o = rays.origins.col(r);
    const Eigen::Vector3f d = rays.dirs.col(r);
    for (int i = 0; i < spr; ++i) {
      const int idx = r * spr + i;
      points.col(idx) = o + static_cast<float>(ts[idx]) * d;
      dirs.col(idx) = d;
    }
  }

  const MatXf pos_enc = encode_batch(points, cfg.l_pos);
  const MatXf dir_enc = encode_batch(dirs, cfg.l_dir);
  net.forward(pos_enc, dir_enc, &out->sigma, &out->rgb, cache);

  out->color.resize(3, n_rays);
  out->depth.resize(n_rays);
  out->opacity.resize(n_rays);
  out->weights.assign(n, 0.f);
  out->trans_next.assign(n, 0.f);

  for (int r = 0; r < n_rays; ++r) {
    double trans = 1.0;
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    double depth_acc = 0.0;
    for (int i = 0; i < spr; ++i) {
      const int idx = r * spr + i;
      const double delta =
          i + 1 < spr ? std::max(ts[idx + 1] - ts[idx], 1e-9)
                      : (params.t_far - params.t_near) / spr;
      const double att = std::exp(-double(out->sigma[idx]) * delta);
      const double w = trans * (1.0 - att);
      trans *= att;
      out->weights[idx] = static_cast<float>(w);
      out->trans_next[idx] = static_cast<float>(trans);
      acc += w * out->rgb.col(idx).cast<double>();
      depth_acc += w * ts[idx];
    }
    const double t_end = trans;
    for (int c = 0; c < 3; ++c) {
      out->color(c, r) = static_cast<float>(acc[c] + t_end * params.background[c]);
    }
    out->depth[r] = static_cast<float>(depth_acc);
    out->opacity[r] = static_cast<float>(1.0 - t_end);
  }
}

// dL/dsigma and dL/drgb per sample from per-ray color gradients.
void composite_backward(const RayBatch& rays, const std::vector<double>& ts, int spr,
                        const RenderParams& params, const PassOutput& pass,
                        const Mat3Xf& d_color, VecXf* d_sigma, Mat3Xf* d_rgb) {
  const int n_rays = rays.count();
  const int n = n_rays * spr;
  d_sigma->setZero(n);
  d_rgb->setZero(3, n);

  const Eigen::Vector3d bg(params.background[0], params.background[1], params.background[2]);
  for (int r = 0; r < n_rays; ++r) {
    const Eigen::Vector3d dc = d_color.col(r).cast<double>();
    // Suffix sum of weighted colors, seeded with the background term.
    const double t_end = pass.trans_next[size_t(r) * spr + spr - 1];
    Eigen::Vector3d suffix = t_end * bg;
    for (int i = spr - 1; i >= 0; --i) {
      const int idx = r * spr + i;
      const double delta =
          i + 1 < spr ? std::max(ts[idx + 1] - ts[idx], 1e-9)
                      : (params.t_far - params.t_near) / spr;
      const Eigen::Vector3d ci = pass.rgb.col(idx).cast<double>();
      const double trans_next = pass.trans_next[idx];
      (*d_sigma)[idx] = static_cast<float>(delta * dc.dot(trans_next * ci - suffix));
      d_rgb->col(idx) = (pass.weights[idx] * dc).cast<float>();
      suffix += double(pass.weights[idx]) * ci;
    }
  }
}

std::vector<double> coarse_samples(const RayBatch& rays, const FieldConfig& cfg,
                                   const RenderParams& params, Rng* rng) {
  const int n_rays = rays.count();
  std::vector<double> ts(size_t(n_rays) * cfg.gamma_coarse);
  for (int r = 0; r < n_rays; ++r) {
    const std::vector<double> t =
        sample_stratified(params.t_near, params.t_far, cfg.gamma_coarse, rng);
    std::copy(t.begin(), t.end(), ts.begin() + size_t(r) * cfg.gamma_coarse);
  }
  return ts;
}

std::vector<double> fine_samples(const RayBatch& rays, const FieldConfig& cfg,
                                 const RenderParams& params, const std::vector<double>& ts_coarse,
                                 const PassOutput& coarse, Rng* rng) {
  const int n_rays = rays.count();
  const int spr = cfg.gamma_coarse + cfg.gamma_fine;
  std::vector<double> ts(size_t(n_rays) * spr);
  std::vector<double> w(cfg.gamma_coarse);
  std::vector<double> tc(cfg.gamma_coarse);
  for (int r = 0; r < n_rays; ++r) {
    for (int i = 0; i < cfg.gamma_coarse; ++i) {
      const int idx = r * cfg.gamma_coarse + i;
      w[i] = coarse.weights[idx];
      tc[i] = ts_coarse[idx];
    }
    const std::vector<double> extra =
        sample_hierarchical(w, tc, params.t_near, params.t_far, cfg.gamma_fine, rng);
    const std::vector<double> merged = merge_samples(tc, extra);
    std::copy(merged.begin(), merged.end(), ts.begin() + size_t(r) * spr);
  }
  return ts;
}

}  // namespace

BatchRender render_rays(const RadianceField& field, const RayBatch& rays,
                        const RenderParams& params, Rng* rng) {
  const FieldConfig& cfg = field.config();
  PassOutput coarse;
  const std::vector<double> ts_c = coarse_samples(rays, cfg, params, rng);
  run_pass(field.coarse(), cfg, rays, ts_c, cfg.gamma_coarse, params, &coarse, nullptr);

  PassOutput fine;
  const std::vector<double> ts_f = fine_samples(rays, cfg, params, ts_c, coarse, rng);
  run_pass(field.fine(), cfg, rays, ts_f, cfg.gamma_coarse + cfg.gamma_fine, params, &fine,
           nullptr);

  BatchRender out;
  out.color_coarse = std::move(coarse.color);
  out.color_fine = std::move(fine.color);
  out.depth_fine = std::move(fine.depth);
  out.opacity_fine = std::move(fine.opacity);
  return out;
}

void camera_ray(const CameraModel& camera, int x, int y, Eigen::Vector3f* origin,
                Eigen::Vector3f* dir) {
  const Vec3 o = optic_centre(camera.pose);
  const Vec3 d = pixel_ray_direction(Vec2(x, y), camera.pose, camera.intrinsics);
  *origin = o.cast<float>();
  *dir = d.cast<float>();
}

ViewRender render_view(const RadianceField& field, const CameraModel& camera,
                       const RenderParams& params) {
  const int w = camera.intrinsics.width;
  const int h = camera.intrinsics.height;
  ViewRender out;
  out.image = Image(w, h);
  out.depth = DepthMap(w, h);
  out.opacity.assign(size_t(w) * h, 0.f);

#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    RayBatch rays;
    rays.origins.resize(3, w);
    rays.dirs.resize(3, w);
    for (int x = 0; x < w; ++x) {
      Eigen::Vector3f o, d;
      camera_ray(camera, x, y, &o, &d);
      rays.origins.col(x) = o;
      rays.dirs.col(x) = d;
    }
    const BatchRender row = render_rays(field, rays, params, nullptr);
    for (int x = 0; x < w; ++x) {
      out.image.set(x, y, row.color_fine(0, x), row.color_fine(1, x), row.color_fine(2, x));
      out.depth.at(x, y) = row.depth_fine[x];
      out.depth.valid.at(x, y) = 1;
      out.opacity[size_t(y) * w + x] = row.opacity_fine[x];
    }
  }
  return out;
}

DepthMap predict_depth_map(const RadianceField& field, const CameraModel& camera,
                           const RenderParams& params, double opacity_threshold) {
  const ViewRender render = render_view(field, camera, params);
  DepthMap depth = render.depth;
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      const float opacity = render.opacity[size_t(y) * depth.width + x];
      if (opacity >= opacity_threshold) {
        depth.valid.at(x, y) = 1;
        // The plain weighted sum underestimates distance wherever the ray
        // keeps residual transmittance; normalize to the conditional
        // expectation given that the ray hit something.
        if (opacity > 1e-6f) depth.at(x, y) /= opacity;
      } else {
        depth.valid.at(x, y) = 0;
      }
    }
  }
  return depth;
}

// ---------------------------------------------------------------------------
// Training

void Adam::step(VecXf& params, const VecXf& grad, float lr) {
  if (m.size() != params.size()) {
    m = VecXf::Zero(params.size());
    v = VecXf::Zero(params.size());
    t = 0;
  }
  ++t;
  m = beta1 * m + (1.f - beta1) * grad;
  v = beta2 * v + (1.f - beta2) * grad.cwiseProduct(grad);
  const float bias1 = 1.f - std::pow(beta1, static_cast<float>(t));
  const float bias2 = 1.f - std::pow(beta2, static_cast<float>(t));
  params.array() -=
      lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + eps);
}

namespace {

double run_both_passes(const RadianceField& field, const RayBatch& rays, const Mat3Xf& gt,
                       const RenderParams& params, const std::vector<double>& ts_c,
                       const std::vector<double>& ts_f, VecXf* grad_coarse, VecXf* grad_fine) {
  const FieldConfig& cfg = field.config();
  const int n_rays = rays.count();
  if (gt.cols() != n_rays) throw ShapeMismatch("gt batch size mismatch");
  const bool want_grad = grad_coarse != nullptr;

  Mlp::Cache cache_c, cache_f;
  PassOutput coarse, fine;
  run_pass(field.coarse(), cfg, rays, ts_c, cfg.gamma_coarse, params, &coarse,
           want_grad ? &cache_c : nullptr);
  const int spr_f = cfg.gamma_coarse + cfg.gamma_fine;
  run_pass(field.fine(), cfg, rays, ts_f, spr_f, params, &fine,
           want_grad ? &cache_f : nullptr);

  const double total = loss(coarse.color, fine.color, gt);
  if (!want_grad) return total;

  grad_coarse->setZero(field.coarse().param_count());
  grad_fine->setZero(field.fine().param_count());

  // d(loss)/d(color) = 2 (pred - gt) / R for each network.
  const float inv_rays = 1.f / static_cast<float>(n_rays);
  const Mat3Xf dc_coarse = 2.f * inv_rays * (coarse.color - gt);
  const Mat3Xf dc_fine = 2.f * inv_rays * (fine.color - gt);

  VecXf d_sigma;
  Mat3Xf d_rgb;
  composite_backward(rays, ts_c, cfg.gamma_coarse, params, coarse, dc_coarse, &d_sigma, &d_rgb);
  field.coarse().backward(cache_c, d_sigma, d_rgb, grad_coarse);

  composite_backward(rays, ts_f, spr_f, params, fine, dc_fine, &d_sigma, &d_rgb);
  field.fine().backward(cache_f, d_sigma, d_rgb, grad_fine);
  return total;
}

}  // namespace

SampleSet draw_sample_set(const RadianceField& field, const RayBatch& rays,
                          const RenderParams& params, Rng* rng) {
  const FieldConfig& cfg = field.config();
  SampleSet set;
  set.coarse = coarse_samples(rays, cfg, params, rng);
  PassOutput coarse;
  run_pass(field.coarse(), cfg, rays, set.coarse, cfg.gamma_coarse, params, &coarse, nullptr);
  set.fine = fine_samples(rays, cfg, params, set.coarse, coarse, rng);
  return set;
}

double loss_with_samples(const RadianceField& field, const RayBatch& rays, const Mat3Xf& gt,
                         const RenderParams& params, const SampleSet& samples,
                         VecXf* grad_coarse, VecXf* grad_fine) {
  return run_both_passes(field, rays, gt, params, samples.coarse, samples.fine, grad_coarse,
                         grad_fine);
}

double loss_and_gradients(const RadianceField& field, const RayBatch& rays, const Mat3Xf& gt,
                          const RenderParams& params, Rng* rng, VecXf* grad_coarse,
                          VecXf* grad_fine) {
  const FieldConfig& cfg = field.config();
  const int n_rays = rays.count();
  if (gt.cols() != n_rays) throw ShapeMismatch("loss_and_gradients: gt batch size mismatch");

  grad_coarse->setZero(field.coarse().param_count());
  grad_fine->setZero(field.fine().param_count());

  // Coarse pass.
  Mlp::Cache cache_c;
  PassOutput coarse;
  const std::vector<double> ts_c = coarse_samples(rays, cfg, params, rng);
  run_pass(field.coarse(), cfg, rays, ts_c, cfg.gamma_coarse, params, &coarse, &cache_c);

  // Fine pass.
  Mlp::Cache cache_f;
  PassOutput fine;
  const std::vector<double> ts_f = fine_samples(rays, cfg, params, ts_c, coarse, rng);
  const int spr_f = cfg.gamma_coarse + cfg.gamma_fine;
  run_pass(field.fine(), cfg, rays, ts_f, spr_f, params, &fine, &cache_f);

  const double total = loss(coarse.color, fine.color, gt);

  // d(loss)/d(color) = 2 (pred - gt) / R for each network.
  const float inv_rays = 1.f / static_cast<float>(n_rays);
  const Mat3Xf dc_coarse = 2.f * inv_rays * (coarse.color - gt);
  const Mat3Xf dc_fine = 2.f * inv_rays * (fine.color - gt);

  VecXf d_sigma;
  Mat3Xf d_rgb;
  composite_backward(rays, ts_c, cfg.gamma_coarse, params, coarse, dc_coarse, &d_sigma, &d_rgb);
  field.coarse().backward(cache_c, d_sigma, d_rgb, grad_coarse);

  composite_backward(rays, ts_f, spr_f, params, fine, dc_fine, &d_sigma, &d_rgb);
  field.fine().backward(cache_f, d_sigma, d_rgb, grad_fine);

  return total;
}

}  // namespace dvm
