#include <cmath>

#include "doctest.h"
#include "dvm/metrics.h"
#include "dvm/rng.h"

using namespace dvm;

namespace {

Image noise_image(int w, int h, uint64_t seed) {
  Image img(w, h);
  Rng rng(seed);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

Image constant_image(int w, int h, float level) {
  Image img(w, h, level);
  return img;
}

}  // namespace

TEST_CASE("psnr of identical images hits the cap") {
  const Image img = noise_image(16, 16, 1);
  CHECK(psnr(img, img) == doctest::Approx(99.0));
}

TEST_CASE("psnr of uniform MSE 0.01 is 20 dB") {
  const Image a = constant_image(8, 8, 0.5f);
  const Image b = constant_image(8, 8, 0.6f);
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-6));
}

TEST_CASE("psnr matches an explicit two-pass recomputation") {
  const Image a = noise_image(24, 18, 2);
  const Image b = noise_image(24, 18, 3);

  double sse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = double(a.data[i]) - double(b.data[i]);
    sse += d * d;
  }
  const double expected = 10.0 * std::log10(1.0 / (sse / double(a.data.size())));
  CHECK(psnr(a, b) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("psnr requires matching dimensions") {
  CHECK_THROWS_AS(psnr(constant_image(4, 4, 0.f), constant_image(5, 4, 0.f)), MetricError);
}

TEST_CASE("psnr decreases monotonically with noise amplitude") {
  const Image base = noise_image(32, 32, 4);
  Rng rng(5);
  std::vector<float> noise(base.data.size());
  for (float& v : noise) v = static_cast<float>(rng.uniform(-1, 1));

  double prev = 1e9;
  for (const double amp : {0.02, 0.05, 0.1, 0.2, 0.4}) {
    Image noisy = base;
    for (size_t i = 0; i < noisy.data.size(); ++i) {
      noisy.data[i] = std::clamp(noisy.data[i] + static_cast<float>(amp) * noise[i], 0.f, 1.f);
    }
    const double value = psnr(base, noisy);
    CHECK(value < prev);
    prev = value;
  }
}

TEST_CASE("ssim of identical images is 1") {
  const Image img = noise_image(32, 24, 6);
  CHECK(ssim(img, img) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("ssim of an image against its negation is negative") {
  Image img(24, 24);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const float v = ((x / 3 + y / 3) & 1) ? 0.9f : 0.1f;
      img.set(x, y, v, v, v);
    }
  }
  Image neg = img;
  for (float& v : neg.data) v = 1.f - v;
  CHECK(ssim(img, neg) < 0.0);
}

TEST_CASE("ssim of two constant images reduces to the luminance term") {
  const double p = 0.3, q = 0.7;
  const Image a = constant_image(16, 16, static_cast<float>(p));
  const Image b = constant_image(16, 16, static_cast<float>(q));
  const double c1 = 0.01 * 0.01;
  const double expected = (2.0 * p * q + c1) / (p * p + q * q + c1);
  CHECK(ssim(a, b) == doctest::Approx(expected).epsilon(1e-5));
}

TEST_CASE("metrics are symmetric") {
  const Image a = noise_image(20, 20, 7);
  const Image b = noise_image(20, 20, 8);
  CHECK(psnr(a, b) == doctest::Approx(psnr(b, a)).epsilon(1e-12));
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
}

TEST_CASE("ssim stays within [-1, 1]") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const Image a = noise_image(16, 16, 100 + seed);
    const Image b = noise_image(16, 16, 200 + seed);
    const double v = ssim(a, b);
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("ssim rejects images smaller than the window") {
  CHECK_THROWS_AS(ssim(constant_image(8, 8, 0.f), constant_image(8, 8, 0.f)), MetricError);
}

TEST_CASE("metric report aggregates row means") {
  MetricReport report;
  report.add("a", 20.0, 0.5);
  report.add("b", 30.0, 0.7);
  report.finalize();
  CHECK(report.mean_psnr == doctest::Approx(25.0));
  CHECK(report.mean_ssim == doctest::Approx(0.6));
  CHECK(report.to_text().find("mean") != std::string::npos);
}
