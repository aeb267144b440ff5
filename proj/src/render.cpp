#include "stcl/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "stcl/error.hpp"
#include "stcl/pose.hpp"

namespace stcl {
namespace {

constexpr double kEps = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Interval {
  double t_near = -kInf;
  double t_far = kInf;
  Vec3 normal;
};

// Clips `iv` against the slab lo <= o + t d <= hi on one axis.
bool clip_slab(double o, double d, double lo, double hi, Vec3 axis, Interval& iv) {
  if (std::abs(d) < 1e-15) return o >= lo && o <= hi;
  double t0 = (lo - o) / d;
  double t1 = (hi - o) / d;
  Vec3 n = -1.0 * axis;
  if (t0 > t1) {
    std::swap(t0, t1);
    n = axis;
  }
  if (t0 > iv.t_near) {
    iv.t_near = t0;
    iv.normal = n;
  }
  iv.t_far = std::min(iv.t_far, t1);
  return iv.t_near <= iv.t_far;
}

std::optional<std::pair<double, Vec3>> hit_box(Vec3 lo, Vec3 hi, Vec3 o, Vec3 d) {
  Interval iv;
  if (!clip_slab(o.x, d.x, lo.x, hi.x, {1, 0, 0}, iv)) return std::nullopt;
  if (!clip_slab(o.y, d.y, lo.y, hi.y, {0, 1, 0}, iv)) return std::nullopt;
  if (!clip_slab(o.z, d.z, lo.z, hi.z, {0, 0, 1}, iv)) return std::nullopt;
  if (iv.t_near <= kEps) return std::nullopt;
  return std::make_pair(iv.t_near, iv.normal);
}

std::optional<std::pair<double, Vec3>> hit_cylinder(const ObjectInstance& obj, Vec3 o, Vec3 d) {
  const double r = 0.5 * obj.size.x;
  const double ox = o.x - obj.position.x, oy = o.y - obj.position.y;
  const double a = d.x * d.x + d.y * d.y;
  Interval iv;
  if (a < 1e-15) {
    if (ox * ox + oy * oy > r * r) return std::nullopt;
  } else {
    const double b = ox * d.x + oy * d.y;
    const double c = ox * ox + oy * oy - r * r;
    const double disc = b * b - a * c;
    if (disc < 0.0) return std::nullopt;
    const double s = std::sqrt(disc);
    // Cancellation-free roots of a t^2 + 2 b t + c = 0.
    const double q = b >= 0.0 ? -(b + s) : -(b - s);
    double t0 = q / a;
    double t1 = q != 0.0 ? c / q : t0;
    if (t0 > t1) std::swap(t0, t1);
    iv.t_near = t0;
    iv.t_far = t1;
    iv.normal = normalized(Vec3{ox + t0 * d.x, oy + t0 * d.y, 0.0});
  }
  const double z0 = obj.position.z - 0.5 * obj.size.z;
  const double z1 = obj.position.z + 0.5 * obj.size.z;
  if (!clip_slab(o.z, d.z, z0, z1, {0, 0, 1}, iv)) return std::nullopt;
  if (iv.t_near <= kEps) return std::nullopt;
  return std::make_pair(iv.t_near, iv.normal);
}

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0))); }

}  // namespace

void RenderConfig::validate() const {
  if (width < 1 || height < 1) throw ConfigError("render width/height must be >= 1");
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw ConfigError("render.fov must be in (0, 180) degrees");
  if (fov_deg * height / width >= 180.0) throw ConfigError("vertical field of view must be < 180 degrees");
}

std::optional<Hit> ray_hit(const Scene& scene, Vec3 origin, Vec3 direction) {
  std::optional<Hit> best;
  auto consider = [&](double t, Vec3 n, int category, int primitive) {
    if (!best || t < best->distance) best = Hit{t, category, n, primitive};
  };

  if (direction.z < 0.0) {
    const double t = -origin.z / direction.z;
    if (t > kEps) {
      const double x = origin.x + t * direction.x, y = origin.y + t * direction.y;
      const Bounds& b = scene.bounds;
      if (x >= b.min_x && x <= b.max_x && y >= b.min_y && y <= b.max_y) consider(t, {0, 0, 1}, -1, -1);
    }
  }
  for (std::size_t i = 0; i < scene.walls.size(); ++i) {
    const auto box = wall_box(scene.walls[i]);
    if (auto h = hit_box(box[0], box[1], origin, direction)) consider(h->first, h->second, -1, -2 - static_cast<int>(i));
  }
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto& obj = scene.objects[i];
    std::optional<std::pair<double, Vec3>> h;
    if (obj.shape == Shape::Box) {
      const Vec3 half = 0.5 * obj.size;
      h = hit_box(obj.position - half, obj.position + half, origin, direction);
    } else {
      h = hit_cylinder(obj, origin, direction);
    }
    if (h) consider(h->first, h->second, obj.category_id, static_cast<int>(i));
  }
  return best;
}

Vec3 camera_ray(double yaw_deg, int px, int py, int width, int height, double fov_deg) {
  const double yaw = deg_to_rad(yaw_deg);
  const Vec3 forward{std::cos(yaw), std::sin(yaw), 0.0};
  const Vec3 right{-std::sin(yaw), std::cos(yaw), 0.0};  // heading(yaw + 90)
  const Vec3 up{0.0, 0.0, 1.0};
  const double tan_h = std::tan(0.5 * deg_to_rad(fov_deg));
  const double tan_v = std::tan(0.5 * deg_to_rad(fov_deg * height / width));
  const double u = (2.0 * (px + 0.5) / width - 1.0) * tan_h;
  const double v = (1.0 - 2.0 * (py + 0.5) / height) * tan_v;
  return normalized(forward + u * right + v * up);
}

std::pair<Image, CategoryMap> render(const Scene& scene, const Pose& pose, const LightingPreset& lighting,
                                     const RenderConfig& config) {
  config.validate();
  const Bounds& b = scene.bounds;
  const Vec3 p = pose.position;
  if (!(p.x >= b.min_x && p.x <= b.max_x && p.y >= b.min_y && p.y <= b.max_y)) {
    throw OutOfBoundsError("camera position (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                           ") is outside the scene bounds");
  }
  Image img(config.width, config.height);
  CategoryMap ids(config.width, config.height);
  for (int py = 0; py < config.height; ++py) {
    for (int px = 0; px < config.width; ++px) {
      const Vec3 dir = camera_ray(pose.yaw, px, py, config.width, config.height, config.fov_deg);
      const auto hit = ray_hit(scene, p, dir);
      std::array<double, 3> rgb = kSkyColor;
      const std::size_t idx = static_cast<std::size_t>(py) * config.width + px;
      if (hit) {
        std::array<double, 3> albedo = kWallAlbedo;
        if (hit->primitive >= 0) {
          albedo = scene.objects[static_cast<std::size_t>(hit->primitive)].albedo;
          ids.ids[idx] = hit->category_id;
        } else if (hit->primitive == -1) {
          albedo = kFloorAlbedo;
        }
        const double shade =
            lighting.ambient + lighting.sun_intensity * std::max(0.0, dot(hit->normal, lighting.sun_direction));
        for (int c = 0; c < 3; ++c) rgb[c] = albedo[c] * shade;
      }
      for (int c = 0; c < 3; ++c) img.pixels[idx * 3 + c] = quantize(rgb[c]);
    }
  }
  return {std::move(img), std::move(ids)};
}

}  // namespace stcl
