#include "dvm/image.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dvm {

std::array<float, 3> Image::sample_bilinear(double u, double v) const {
  const int x0 = std::clamp(static_cast<int>(std::floor(u)), 0, width - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(v)), 0, height - 1);
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double fu = u - x0;
  const double fv = v - y0;

  const float* p00 = at(x0, y0);
  const float* p10 = at(x1, y0);
  const float* p01 = at(x0, y1);
  const float* p11 = at(x1, y1);

  std::array<float, 3> out;
  for (int c = 0; c < 3; ++c) {
    const double top = p00[c] * (1.0 - fu) + p10[c] * fu;
    const double bot = p01[c] * (1.0 - fu) + p11[c] * fu;
    out[c] = static_cast<float>(top * (1.0 - fv) + bot * fv);
  }
  return out;
}

size_t Mask::count_valid() const {
  return std::accumulate(data.begin(), data.end(), size_t(0),
                         [](size_t acc, uint8_t m) { return acc + (m ? 1 : 0); });
}

}  // namespace dvm
