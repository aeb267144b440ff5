#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "stcl/geometry.hpp"
#include "stcl/scene.hpp"

namespace stcl {

struct Pose;

/// 8-bit RGB, row-major, 3 bytes per pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}
  bool operator==(const Image&) const = default;
};

/// Per-pixel category id, -1 where the ray hit a wall, the floor or nothing.
struct CategoryMap {
  int width = 0;
  int height = 0;
  std::vector<int> ids;

  CategoryMap() = default;
  CategoryMap(int w, int h) : width(w), height(h), ids(static_cast<std::size_t>(w) * h, -1) {}
  bool operator==(const CategoryMap&) const = default;
};

/// What a ray hit. `primitive` indexes objects (>= 0), walls (-2 - index),
/// or the floor (-1); exposed for debugging and oracle comparison.
struct Hit {
  double distance = 0.0;
  int category_id = -1;
  Vec3 normal;
  int primitive = -1;
};

struct RenderConfig {
  int width = 64;
  int height = 64;
  double fov_deg = 90.0;

  void validate() const;
  bool operator==(const RenderConfig&) const = default;
};

inline constexpr std::array<double, 3> kWallAlbedo{0.78, 0.76, 0.72};
inline constexpr std::array<double, 3> kFloorAlbedo{0.42, 0.36, 0.30};
inline constexpr std::array<double, 3> kSkyColor{0.62, 0.74, 0.90};

/// Nearest intersection along a unit ray. Empty when the ray leaves the
/// scene without hitting anything (e.g. through the open ceiling).
std::optional<Hit> ray_hit(const Scene& scene, Vec3 origin, Vec3 direction);

/// Unit direction of the ray through the center of pixel (px, py).
/// Horizontal field of view is fov_deg; vertical is fov_deg * height / width.
/// Image columns run toward increasing yaw (the camera's right is yaw + 90).
Vec3 camera_ray(double yaw_deg, int px, int py, int width, int height, double fov_deg);

/// Lambertian + ambient shading; throws OutOfBoundsError if the pose is
/// outside the scene bounds.
std::pair<Image, CategoryMap> render(const Scene& scene, const Pose& pose, const LightingPreset& lighting,
                                     const RenderConfig& config);

}  // namespace stcl
