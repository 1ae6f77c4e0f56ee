#include "dvm/metrics.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dvm {
namespace {

constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

void require_same_size(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) {
    throw MetricError("image dimensions differ");
  }
}

std::vector<double> grayscale(const Image& img) {
  std::vector<double> g(img.pixel_count());
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const float* p = img.at(x, y);
      g[size_t(y) * img.width + x] = (p[0] + p[1] + p[2]) / 3.0;
    }
  }
  return g;
}

std::vector<double> gaussian_kernel() {
  std::vector<double> k(kWindow);
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - (kWindow - 1) / 2.0;
    k[i] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable valid-region convolution; output is (w-10) x (h-10).
std::vector<double> filter_valid(const std::vector<double>& in, int w, int h, int& ow, int& oh) {
  const std::vector<double> k = gaussian_kernel();
  ow = w - kWindow + 1;
  oh = h - kWindow + 1;
  std::vector<double> horiz(size_t(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWindow; ++i) acc += k[i] * in[size_t(y) * w + x + i];
      horiz[size_t(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(size_t(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWindow; ++i) acc += k[i] * horiz[size_t(y + i) * ow + x];
      out[size_t(y) * ow + x] = acc;
    }
  }
  return out;
}

std::vector<double> hadamard(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  require_same_size(a, b);
  double sse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = double(a.data[i]) - double(b.data[i]);
    sse += d * d;
  }
  const double mse = sse / double(a.data.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& a, const Image& b) {
  require_same_size(a, b);
  if (a.width < kWindow || a.height < kWindow) {
    throw MetricError("image smaller than the SSIM window");
  }

  const std::vector<double> ga = grayscale(a);
  const std::vector<double> gb = grayscale(b);

  int ow = 0, oh = 0;
  const std::vector<double> mu_a = filter_valid(ga, a.width, a.height, ow, oh);
  const std::vector<double> mu_b = filter_valid(gb, a.width, a.height, ow, oh);
  const std::vector<double> aa = filter_valid(hadamard(ga, ga), a.width, a.height, ow, oh);
  const std::vector<double> bb = filter_valid(hadamard(gb, gb), a.width, a.height, ow, oh);
  const std::vector<double> ab = filter_valid(hadamard(ga, gb), a.width, a.height, ow, oh);

  const double c1 = kK1 * kK1;
  const double c2 = kK2 * kK2;

  double total = 0.0;
  for (size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double va = aa[i] - ma * ma;
    const double vb = bb[i] - mb * mb;
    const double cov = ab[i] - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
             ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / double(mu_a.size());
}

void MetricReport::add(const std::string& name, double psnr_value, double ssim_value) {
  rows.push_back({name, psnr_value, ssim_value});
}

void MetricReport::finalize() {
  mean_psnr = 0.0;
  mean_ssim = 0.0;
  if (rows.empty()) return;
  for (const MetricRow& r : rows) {
    mean_psnr += r.psnr;
    mean_ssim += r.ssim;
  }
  mean_psnr /= double(rows.size());
  mean_ssim /= double(rows.size());
}

std::string MetricReport::to_text() const {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "# name psnr ssim\n";
  for (const MetricRow& r : rows) {
    os << r.name << " " << r.psnr << " " << r.ssim << "\n";
  }
  os << "mean " << mean_psnr << " " << mean_ssim << "\n";
  return os.str();
}

}  // namespace dvm
