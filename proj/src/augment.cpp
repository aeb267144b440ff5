#include "stcl/augment.hpp"

#include <algorithm>
#include <cmath>

#include "stcl/error.hpp"

namespace stcl {

FloatImage to_float(const Image& img) {
  FloatImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(c, y, x) = static_cast<float>(img.pixels[(static_cast<std::size_t>(y) * img.width + x) * 3 + c]) / 255.0f;
  return out;
}

void AugmentConfig::validate() const {
  if (!(crop_scale_lo > 0.0 && crop_scale_lo <= crop_scale_hi && crop_scale_hi <= 1.0))
    throw ConfigError("augment crop scale range must satisfy 0 < lo <= hi <= 1");
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(flip_prob) || !prob(grayscale_prob)) throw ConfigError("augment probabilities must be in [0, 1]");
  if (!prob(jitter_strength)) throw ConfigError("augment.jitter must be in [0, 1]");
  if (output_size < 1) throw ConfigError("augment.output_size must be >= 1");
}

AugmentDraw draw_augment(int width, int height, const AugmentConfig& config, Rng& rng) {
  AugmentDraw d;
  const double area = static_cast<double>(width) * height;
  const double scale = rng.uniform(config.crop_scale_lo, config.crop_scale_hi);
  d.crop_side = std::min(std::sqrt(scale * area), static_cast<double>(std::min(width, height)));
  d.crop_x = rng.uniform(0.0, width - d.crop_side);
  d.crop_y = rng.uniform(0.0, height - d.crop_side);
  d.flip = rng.bernoulli(config.flip_prob);
  const double s = config.jitter_strength;
  d.brightness = rng.uniform(1.0 - s, 1.0 + s);
  d.contrast = rng.uniform(1.0 - s, 1.0 + s);
  d.grayscale = rng.bernoulli(config.grayscale_prob);
  return d;
}

FloatImage apply_augment(const Image& image, const AugmentDraw& d, const AugmentConfig& config) {
  if (image.width < 1 || image.height < 1) throw ConfigError("cannot augment an empty image");
  const int n = config.output_size;
  FloatImage out(n, n);
  const double step = d.crop_side / n;
  auto src = [&](int x, int y, int c) {
    return static_cast<double>(image.pixels[(static_cast<std::size_t>(y) * image.width + x) * 3 + c]) / 255.0;
  };
  // Pixel-center sampling, clamped at the borders.
  for (int oy = 0; oy < n; ++oy) {
    const double sy = std::clamp(d.crop_y + (oy + 0.5) * step - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double fy = sy - y0;
    for (int ox = 0; ox < n; ++ox) {
      const double sx = std::clamp(d.crop_x + (ox + 0.5) * step - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double fx = sx - x0;
      const int tx = d.flip ? n - 1 - ox : ox;
      for (int c = 0; c < 3; ++c) {
        const double top = src(x0, y0, c) * (1.0 - fx) + src(x1, y0, c) * fx;
        const double bot = src(x0, y1, c) * (1.0 - fx) + src(x1, y1, c) * fx;
        out.at(c, oy, tx) = static_cast<float>(top * (1.0 - fy) + bot * fy);
      }
    }
  }

  const bool jitter = d.brightness != 1.0 || d.contrast != 1.0;
  if (jitter) {
    double mean = 0.0;
    for (float& v : out.data) {
      v = static_cast<float>(v * d.brightness);
      mean += v;
    }
    mean /= static_cast<double>(out.data.size());
    for (float& v : out.data) v = static_cast<float>(d.contrast * (v - mean) + mean);
  }
  if (d.grayscale) {
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const float lum = static_cast<float>(0.299 * out.at(0, y, x) + 0.587 * out.at(1, y, x) + 0.114 * out.at(2, y, x));
        for (int c = 0; c < 3; ++c) out.at(c, y, x) = lum;
      }
  }
  for (float& v : out.data) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

FloatImage hflip(const FloatImage& img) {
  FloatImage out(img.width, img.height);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) out.at(c, y, img.width - 1 - x) = img.at(c, y, x);
  return out;
}

}  // namespace stcl
