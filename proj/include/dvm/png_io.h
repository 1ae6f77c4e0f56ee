#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "dvm/image.h"

namespace dvm {

struct ImageDecodeError : std::runtime_error {
  explicit ImageDecodeError(const std::string& what) : std::runtime_error(what) {}
};

struct LoadedPng {
  Image rgb;
  bool has_alpha = false;
  std::vector<float> alpha;  // per pixel in [0,1], only when has_alpha
};

// Decodes an 8- or 16-bit PNG (gray / gray+alpha / RGB / RGBA / palette) to
// float RGB in [0,1] plus the alpha plane when present.
LoadedPng read_png(const std::string& path);

// 8-bit RGB.
void write_png(const std::string& path, const Image& img);

// 8-bit RGBA with a per-pixel alpha plane in [0,1].
void write_png_rgba(const std::string& path, const Image& img, const std::vector<float>& alpha);

// 8-bit single channel, 0 or 255.
void write_png_mask(const std::string& path, const Mask& mask);

Mask read_png_mask(const std::string& path);

}  // namespace dvm
