#pragma once

#include <vector>

#include "stcl/render.hpp"
#include "stcl/rng.hpp"

namespace stcl {

/// Planar float image (channel-major: all R, then G, then B), values in [0, 1].
struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  FloatImage() = default;
  FloatImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0.0f) {}
  float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  bool operator==(const FloatImage&) const = default;
};

FloatImage to_float(const Image& img);

struct AugmentConfig {
  double crop_scale_lo = 0.4;
  double crop_scale_hi = 1.0;
  double flip_prob = 0.5;
  double jitter_strength = 0.4;
  double grayscale_prob = 0.2;
  int output_size = 64;

  void validate() const;
  bool operator==(const AugmentConfig&) const = default;
};

/// Random choices for one view, drawn before any pixel work.
struct AugmentDraw {
  double crop_x = 0.0;  // top-left corner, source pixels
  double crop_y = 0.0;
  double crop_side = 0.0;
  bool flip = false;
  double brightness = 1.0;
  double contrast = 1.0;
  bool grayscale = false;
};

AugmentDraw draw_augment(int width, int height, const AugmentConfig& config, Rng& rng);

/// Square crop -> bilinear resize -> flip -> brightness -> contrast ->
/// grayscale -> clamp to [0, 1].
FloatImage apply_augment(const Image& image, const AugmentDraw& draw, const AugmentConfig& config);

inline FloatImage augment(const Image& image, const AugmentConfig& config, Rng& rng) {
  return apply_augment(image, draw_augment(image.width, image.height, config, rng), config);
}

/// Mirrors columns.
FloatImage hflip(const FloatImage& img);

}  // namespace stcl
