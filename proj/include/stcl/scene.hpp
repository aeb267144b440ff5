#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "stcl/geometry.hpp"

namespace stcl {

/// Axis-aligned floor rectangle in meters.
struct Bounds {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  bool operator==(const Bounds&) const = default;
};

/// Axis-aligned wall segment standing on the floor. The solid is the box
/// swept by the segment with the given thickness, centered on the segment.
/// `perimeter` marks the four walls on the bounds edges.
struct Wall {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;
  double height = 0.0;
  double thickness = 0.0;
  bool perimeter = false;

  bool operator==(const Wall&) const = default;
};

enum class Shape { Box, Cylinder };

/// A furnishing. `position` is the center of the bounding box and `size` its
/// full extents; cylinders are vertical with diameter size.x (== size.y).
struct ObjectInstance {
  int category_id = 0;
  Shape shape = Shape::Box;
  Vec3 position;
  Vec3 size;
  std::array<double, 3> albedo{};

  bool operator==(const ObjectInstance&) const = default;
};

struct LightingPreset {
  int id = 0;
  double ambient = 0.0;
  Vec3 sun_direction{0.0, 0.0, 1.0};  // unit vector pointing toward the light
  double sun_intensity = 0.0;

  bool operator==(const LightingPreset&) const = default;
};

struct SceneConfig {
  int room_count = 2;
  int min_objects = 12;
  int max_objects = 16;
  int categories = 6;
  double width = 10.0;  // along x
  double depth = 8.0;   // along y
  double wall_height = 2.5;
  int lighting_presets = 3;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
  bool operator==(const SceneConfig&) const = default;
};

struct Scene {
  std::int64_t seed = 0;
  Bounds bounds;
  std::vector<Wall> walls;
  std::vector<ObjectInstance> objects;
  std::vector<LightingPreset> lighting_presets;
  int category_count = 0;

  const LightingPreset& lighting(int id) const;
  bool operator==(const Scene&) const = default;
};

/// Largest supported category count (size of the fixed palette).
int max_categories();

/// Base albedo of a category; instances vary by at most kAlbedoJitter per channel.
std::array<double, 3> category_albedo(int category_id);
inline constexpr double kAlbedoJitter = 0.05;

/// Shape used by every instance of a category.
Shape category_shape(int category_id);

inline constexpr int kPlacementRetries = 1000;

/// Pure function of (seed, config). Throws ConfigError for invalid configs and
/// PlacementError if an object cannot be placed within kPlacementRetries.
Scene generate_scene(std::int64_t seed, const SceneConfig& config);

/// True iff a sphere of `radius` at `position` touches no wall or object and
/// its horizontal extent lies inside the bounds. Contact counts as collision.
bool is_free(const Scene& scene, Vec3 position, double radius);

/// Distance from a point to the solid of an object (0 inside).
double distance_to_object(const ObjectInstance& obj, Vec3 p);
/// Distance from a point to the solid of a wall (0 inside).
double distance_to_wall(const Wall& wall, Vec3 p);

/// Axis-aligned solid box of a wall: {min, max}.
std::array<Vec3, 2> wall_box(const Wall& wall);

std::string to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);

void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

}  // namespace stcl
