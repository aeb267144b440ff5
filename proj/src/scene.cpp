#include "stcl/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stcl/error.hpp"
#include "stcl/rng.hpp"

namespace stcl {
namespace {

using json = nlohmann::json;

constexpr double kWallThickness = 0.1;
constexpr double kDoorWidth = 1.2;
constexpr double kObjectGap = 0.15;    // minimum clearance between footprints
constexpr double kBoundsMargin = 0.25; // objects keep this far from the bounds
constexpr double kDoorKeepOut = 0.8;   // objects stay clear of doorways

// Levels 0.15/0.55/0.95 per channel: any two distinct entries differ by at
// least 0.4 in some channel, which leaves >= 0.3 after +-0.05 jitter.
std::vector<std::array<double, 3>> build_palette() {
  const double lv[3] = {0.15, 0.55, 0.95};
  std::vector<std::array<double, 3>> out = {
      {0.95, 0.15, 0.15}, {0.15, 0.55, 0.95}, {0.15, 0.95, 0.15}, {0.95, 0.95, 0.15},
      {0.95, 0.15, 0.95}, {0.15, 0.95, 0.95}, {0.95, 0.55, 0.15}, {0.55, 0.15, 0.95},
      {0.15, 0.15, 0.15}, {0.95, 0.95, 0.95},
  };
  for (double r : lv)
    for (double g : lv)
      for (double b : lv) {
        const std::array<double, 3> c{r, g, b};
        if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
      }
  return out;
}

const std::vector<std::array<double, 3>>& palette() {
  static const auto p = build_palette();
  return p;
}

struct Footprint {
  double x0, y0, x1, y1;
  bool overlaps(const Footprint& o, double gap) const {
    return x0 < o.x1 + gap && o.x0 < x1 + gap && y0 < o.y1 + gap && o.y0 < y1 + gap;
  }
};

Footprint footprint(const ObjectInstance& o) {
  return {o.position.x - 0.5 * o.size.x, o.position.y - 0.5 * o.size.y, o.position.x + 0.5 * o.size.x,
          o.position.y + 0.5 * o.size.y};
}

Footprint footprint(const Wall& w) {
  const auto box = wall_box(w);
  return {box[0].x, box[0].y, box[1].x, box[1].y};
}

// Per-category size ranges: footprint side (or diameter) and height, meters.
void sample_size(int category, Rng& rng, ObjectInstance& obj) {
  const double height_base = 1.0 + 0.25 * (category % 5);
  const double height = height_base + rng.uniform(0.0, 0.3);
  if (category_shape(category) == Shape::Cylinder) {
    const double d = rng.uniform(0.6, 1.1);
    obj.size = {d, d, height};
  } else {
    obj.size = {rng.uniform(0.7, 1.4), rng.uniform(0.7, 1.4), height};
  }
}

json vec_json(Vec3 v) { return json::array({v.x, v.y, v.z}); }
Vec3 vec_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

}  // namespace

void SceneConfig::validate() const {
  if (categories < 2) throw ConfigError("scene.categories must be >= 2");
  if (categories > max_categories())
    throw ConfigError("scene.categories must be <= " + std::to_string(max_categories()));
  if (min_objects > max_objects) throw ConfigError("scene object count range is empty (min > max)");
  if (min_objects < categories) throw ConfigError("scene.min_objects must be >= scene.categories");
  if (room_count < 1) throw ConfigError("scene.rooms must be >= 1");
  if (!(width > 2.0) || !(depth > 2.0)) throw ConfigError("scene width/depth must exceed 2 m");
  if (!(wall_height > 0.0)) throw ConfigError("scene.wall_height must be > 0");
  if (width / room_count < 2.0) throw ConfigError("rooms narrower than 2 m");
  if (lighting_presets < 1) throw ConfigError("scene.lighting_presets must be >= 1");
}

const LightingPreset& Scene::lighting(int id) const {
  for (const auto& l : lighting_presets)
    if (l.id == id) return l;
  throw ConfigError("unknown lighting preset id " + std::to_string(id));
}

int max_categories() { return static_cast<int>(palette().size()); }

std::array<double, 3> category_albedo(int category_id) { return palette().at(static_cast<std::size_t>(category_id)); }

Shape category_shape(int category_id) { return category_id % 2 == 0 ? Shape::Box : Shape::Cylinder; }

std::array<Vec3, 2> wall_box(const Wall& w) {
  const double h = 0.5 * w.thickness;
  const double xa = std::min(w.x0, w.x1), xb = std::max(w.x0, w.x1);
  const double ya = std::min(w.y0, w.y1), yb = std::max(w.y0, w.y1);
  return {Vec3{xa - h, ya - h, 0.0}, Vec3{xb + h, yb + h, w.height}};
}

Scene generate_scene(std::int64_t seed, const SceneConfig& config) {
  config.validate();
  Rng rng(static_cast<std::uint64_t>(seed));
  Scene scene;
  scene.seed = seed;
  scene.category_count = config.categories;
  scene.bounds = {0.0, 0.0, config.width, config.depth};
  const double W = config.width, D = config.depth, H = config.wall_height;

  scene.walls.push_back({0.0, 0.0, W, 0.0, H, kWallThickness, true});
  scene.walls.push_back({W, 0.0, W, D, H, kWallThickness, true});
  scene.walls.push_back({W, D, 0.0, D, H, kWallThickness, true});
  scene.walls.push_back({0.0, D, 0.0, 0.0, H, kWallThickness, true});

  // Partitions split the floor into rooms along x, each with one doorway.
  std::vector<Footprint> keep_out;
  for (int r = 1; r < config.room_count; ++r) {
    const double x = W * r / config.room_count;
    const double door_lo = rng.uniform(0.6, D - 0.6 - kDoorWidth);
    const double door_hi = door_lo + kDoorWidth;
    scene.walls.push_back({x, 0.0, x, door_lo, H, kWallThickness, false});
    scene.walls.push_back({x, door_hi, x, D, H, kWallThickness, false});
    keep_out.push_back({x - kDoorKeepOut, door_lo, x + kDoorKeepOut, door_hi});
  }

  const int count = static_cast<int>(rng.between(config.min_objects, config.max_objects));
  for (int k = 0; k < count; ++k) {
    const int category = k < config.categories ? k : static_cast<int>(rng.below(config.categories));
    ObjectInstance obj;
    obj.category_id = category;
    obj.shape = category_shape(category);
    const auto base = category_albedo(category);
    for (int c = 0; c < 3; ++c) obj.albedo[c] = std::clamp(base[c] + rng.uniform(-kAlbedoJitter, kAlbedoJitter), 0.0, 1.0);
    sample_size(category, rng, obj);

    bool placed = false;
    for (int attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
      const double hx = 0.5 * obj.size.x, hy = 0.5 * obj.size.y;
      const double lo_x = kBoundsMargin + hx, hi_x = W - kBoundsMargin - hx;
      const double lo_y = kBoundsMargin + hy, hi_y = D - kBoundsMargin - hy;
      if (hi_x <= lo_x || hi_y <= lo_y) break;
      obj.position = {rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y), 0.5 * obj.size.z};
      const Footprint fp = footprint(obj);
      bool ok = true;
      for (const auto& other : scene.objects)
        if (fp.overlaps(footprint(other), kObjectGap)) { ok = false; break; }
      for (std::size_t w = 0; ok && w < scene.walls.size(); ++w)
        if (fp.overlaps(footprint(scene.walls[w]), kObjectGap)) ok = false;
      for (std::size_t d = 0; ok && d < keep_out.size(); ++d)
        if (fp.overlaps(keep_out[d], 0.0)) ok = false;
      placed = ok;
    }
    if (!placed) {
      throw PlacementError("could not place object " + std::to_string(k) + " (category " + std::to_string(category) +
                               ") without overlap after " + std::to_string(kPlacementRetries) +
                               " attempts; seed " + std::to_string(seed),
                           seed);
    }
    scene.objects.push_back(obj);
  }

  for (int l = 0; l < config.lighting_presets; ++l) {
    LightingPreset p;
    p.id = l;
    p.ambient = 0.2 + rng.uniform(0.0, 0.25);
    p.sun_intensity = 0.45 + rng.uniform(0.0, 0.45);
    const double az = deg_to_rad(rng.uniform(0.0, 360.0));
    const double el = deg_to_rad(rng.uniform(30.0, 70.0));
    p.sun_direction = normalized(Vec3{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)});
    scene.lighting_presets.push_back(p);
  }
  return scene;
}

double distance_to_object(const ObjectInstance& obj, Vec3 p) {
  const Vec3 h = 0.5 * obj.size;
  const double dz = std::max(0.0, std::abs(p.z - obj.position.z) - h.z);
  if (obj.shape == Shape::Cylinder) {
    const double rx = p.x - obj.position.x, ry = p.y - obj.position.y;
    const double dr = std::max(0.0, std::sqrt(rx * rx + ry * ry) - h.x);
    return std::sqrt(dr * dr + dz * dz);
  }
  const double dx = std::max(0.0, std::abs(p.x - obj.position.x) - h.x);
  const double dy = std::max(0.0, std::abs(p.y - obj.position.y) - h.y);
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double distance_to_wall(const Wall& wall, Vec3 p) {
  const auto box = wall_box(wall);
  const double dx = std::max({0.0, box[0].x - p.x, p.x - box[1].x});
  const double dy = std::max({0.0, box[0].y - p.y, p.y - box[1].y});
  const double dz = std::max({0.0, box[0].z - p.z, p.z - box[1].z});
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

bool is_free(const Scene& scene, Vec3 position, double radius) {
  const Bounds& b = scene.bounds;
  if (position.x - radius < b.min_x || position.x + radius > b.max_x || position.y - radius < b.min_y ||
      position.y + radius > b.max_y)
    return false;
  for (const auto& w : scene.walls)
    if (distance_to_wall(w, position) <= radius) return false;
  for (const auto& o : scene.objects)
    if (distance_to_object(o, position) <= radius) return false;
  return true;
}

std::string to_json(const Scene& scene) {
  json j;
  j["seed"] = scene.seed;
  j["category_count"] = scene.category_count;
  j["bounds"] = {{"min_x", scene.bounds.min_x},
                 {"min_y", scene.bounds.min_y},
                 {"max_x", scene.bounds.max_x},
                 {"max_y", scene.bounds.max_y}};
  j["walls"] = json::array();
  for (const auto& w : scene.walls) {
    j["walls"].push_back({{"x0", w.x0},
                          {"y0", w.y0},
                          {"x1", w.x1},
                          {"y1", w.y1},
                          {"height", w.height},
                          {"thickness", w.thickness},
                          {"perimeter", w.perimeter}});
  }
  j["objects"] = json::array();
  for (const auto& o : scene.objects) {
    j["objects"].push_back({{"category_id", o.category_id},
                            {"shape", o.shape == Shape::Box ? "box" : "cylinder"},
                            {"position", vec_json(o.position)},
                            {"size", vec_json(o.size)},
                            {"albedo", o.albedo}});
  }
  j["lighting_presets"] = json::array();
  for (const auto& l : scene.lighting_presets) {
    j["lighting_presets"].push_back({{"id", l.id},
                                     {"ambient", l.ambient},
                                     {"sun_direction", vec_json(l.sun_direction)},
                                     {"sun_intensity", l.sun_intensity}});
  }
  return j.dump(2) + "\n";
}

Scene scene_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    Scene s;
    s.seed = j.at("seed").get<std::int64_t>();
    s.category_count = j.at("category_count").get<int>();
    const auto& b = j.at("bounds");
    s.bounds = {b.at("min_x").get<double>(), b.at("min_y").get<double>(), b.at("max_x").get<double>(),
                b.at("max_y").get<double>()};
    for (const auto& w : j.at("walls")) {
      s.walls.push_back({w.at("x0").get<double>(), w.at("y0").get<double>(), w.at("x1").get<double>(),
                         w.at("y1").get<double>(), w.at("height").get<double>(), w.at("thickness").get<double>(),
                         w.value("perimeter", false)});
    }
    for (const auto& o : j.at("objects")) {
      ObjectInstance obj;
      obj.category_id = o.at("category_id").get<int>();
      const auto shape = o.at("shape").get<std::string>();
      if (shape != "box" && shape != "cylinder") throw ValidationError("unknown object shape '" + shape + "'");
      obj.shape = shape == "box" ? Shape::Box : Shape::Cylinder;
      obj.position = vec_from(o.at("position"));
      obj.size = vec_from(o.at("size"));
      obj.albedo = o.at("albedo").get<std::array<double, 3>>();
      s.objects.push_back(obj);
    }
    for (const auto& l : j.at("lighting_presets")) {
      s.lighting_presets.push_back({l.at("id").get<int>(), l.at("ambient").get<double>(),
                                    vec_from(l.at("sun_direction")), l.at("sun_intensity").get<double>()});
    }
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed scene JSON: ") + e.what());
  }
}

void save_scene(const Scene& scene, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << to_json(scene);
  if (!out) throw IoError("write failed: " + path);
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return scene_from_json(ss.str());
}

}  // namespace stcl
