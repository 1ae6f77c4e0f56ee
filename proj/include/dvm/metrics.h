#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "dvm/image.h"

namespace dvm {

struct MetricError : std::runtime_error {
  explicit MetricError(const std::string& what) : std::runtime_error(what) {}
};

// Identical images are reported as this cap instead of +inf.
inline constexpr double kPsnrCap = 99.0;

// 10*log10(1/MSE), MSE over all three channels jointly, dynamic range 1.0.
double psnr(const Image& a, const Image& b);

// Single-channel SSIM on the channel-mean grayscale. 11x11 Gaussian window
// (sigma 1.5), k1=0.01, k2=0.03, dynamic range 1.0, averaged over windows
// fully inside the image.
double ssim(const Image& a, const Image& b);

struct MetricRow {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;

  void add(const std::string& name, double psnr_value, double ssim_value);
  void finalize();  // recomputes the aggregate means
  std::string to_text() const;
};

}  // namespace dvm
