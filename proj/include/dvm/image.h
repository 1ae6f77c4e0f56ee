#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace dvm {

// Interleaved RGB raster, components in [0,1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // 3 * width * height

  Image() = default;
  Image(int w, int h, float fill = 0.f) : width(w), height(h), data(3 * size_t(w) * h, fill) {}

  float* at(int x, int y) { return data.data() + 3 * (size_t(y) * width + x); }
  const float* at(int x, int y) const { return data.data() + 3 * (size_t(y) * width + x); }

  void set(int x, int y, float r, float g, float b) {
    float* p = at(x, y);
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  bool contains(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  size_t pixel_count() const { return size_t(width) * height; }

  // Bilinear sample at continuous coordinates (integer coordinates are pixel
  // centres). Caller guarantees u in [0, width-1], v in [0, height-1].
  std::array<float, 3> sample_bilinear(double u, double v) const;
};

// Per-pixel validity, 1 = valid.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> data;

  Mask() = default;
  Mask(int w, int h, uint8_t fill = 0) : width(w), height(h), data(size_t(w) * h, fill) {}

  uint8_t& at(int x, int y) { return data[size_t(y) * width + x]; }
  uint8_t at(int x, int y) const { return data[size_t(y) * width + x]; }
  size_t count_valid() const;
};

// Per-pixel distance from the optic centre along the pixel ray, with a
// validity mask (invalid = background / no estimate).
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> data;
  Mask valid;

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h), data(size_t(w) * h, 0.f), valid(w, h, 0) {}

  float& at(int x, int y) { return data[size_t(y) * width + x]; }
  float at(int x, int y) const { return data[size_t(y) * width + x]; }
};

}  // namespace dvm
