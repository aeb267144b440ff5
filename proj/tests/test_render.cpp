#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "stcl/error.hpp"
#include "stcl/image_io.hpp"
#include "stcl/pose.hpp"
#include "stcl/render.hpp"
#include "stcl/rng.hpp"
#include "test_support.hpp"

using namespace stcl;

namespace {

Pose pose_at(double x, double y, double yaw) {
  Pose p;
  p.position = {x, y, 1.5};
  p.yaw = yaw;
  return p;
}

}  // namespace

TEST_CASE("ray_hit matches sphere tracing") {
  const Scene s = generate_scene(4, SceneConfig{});
  Rng rng(21);
  int hits = 0;
  for (int n = 0; n < 300; ++n) {
    Vec3 o;
    do o = {rng.uniform(0.0, 10.0), rng.uniform(0.0, 8.0), rng.uniform(0.05, 2.4)};
    while (!oracle::sphere_free(s, o, 0.02));
    Vec3 d{rng.normal(), rng.normal(), rng.normal()};
    d = normalized(d);
    const auto got = ray_hit(s, o, d);
    const auto want = oracle::march(s, o, d);
    REQUIRE(got.has_value() == want.has_value());
    if (got) {
      ++hits;
      CHECK(std::abs(got->distance - *want) <= 1e-3);
      CHECK(std::abs(oracle::scene_sdf(s, o + got->distance * d)) < 1e-6);
    }
  }
  CHECK(hits > 100);
}

TEST_CASE("hit reports the primitive, its category and an outward normal") {
  Scene s;
  s.bounds = {0, 0, 10, 10};
  ObjectInstance box;
  box.category_id = 4;
  box.position = {5, 5, 1};
  box.size = {2, 2, 2};
  s.objects.push_back(box);
  auto h = ray_hit(s, {1, 5, 1}, {1, 0, 0});
  REQUIRE(h);
  CHECK(h->distance == doctest::Approx(3.0));
  CHECK(h->category_id == 4);
  CHECK(h->primitive == 0);
  CHECK(h->normal == Vec3{-1, 0, 0});
  h = ray_hit(s, {1, 1, 1}, normalized({0, 0, -1}));
  REQUIRE(h);
  CHECK(h->primitive == -1);
  CHECK(h->distance == doctest::Approx(1.0));
  CHECK_FALSE(ray_hit(s, {1, 1, 1}, {0, 0, 1}));
  CHECK_FALSE(ray_hit(s, {1, 1, 1}, {-1, 0, 0}));  // no walls: off the floor edge into nothing
}

TEST_CASE("camera rays follow the yaw convention") {
  const Vec3 center = camera_ray(0.0, 32, 32, 65, 65, 90.0);
  CHECK(center.x == doctest::Approx(1.0));
  const Vec3 right = camera_ray(0.0, 63, 32, 64, 64, 90.0);
  CHECK(right.y > 0.0);  // columns run toward increasing yaw
  const Vec3 top = camera_ray(90.0, 32, 0, 64, 64, 90.0);
  CHECK(top.z > 0.0);
  CHECK(top.y > 0.0);
  CHECK(camera_ray(0.0, 0, 0, 1, 1, 90.0) == Vec3{1.0, 0.0, 0.0});
  // First column center sits just inside the 45 degree half-angle.
  const Vec3 c0 = camera_ray(0.0, 0, 50, 100, 101, 90.0);
  CHECK(std::atan2(-c0.y, c0.x) == doctest::Approx(std::atan(0.99)));
}

TEST_CASE("render is deterministic and consistent with ray_hit") {
  const Scene s = generate_scene(2, SceneConfig{});
  RenderConfig cfg;
  cfg.width = 32;
  cfg.height = 24;
  const Pose p = pose_at(2.0, 3.0, 10.0);
  const auto a = render(s, p, s.lighting(0), cfg);
  const auto b = render(s, p, s.lighting(0), cfg);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first.pixels.size() == 32u * 24u * 3u);
  for (int y = 0; y < cfg.height; ++y)
    for (int x = 0; x < cfg.width; ++x) {
      const auto h = ray_hit(s, p.position, camera_ray(p.yaw, x, y, cfg.width, cfg.height, cfg.fov_deg));
      const int want = h && h->primitive >= 0 ? h->category_id : -1;
      CHECK(a.second.ids[static_cast<std::size_t>(y) * cfg.width + x] == want);
    }
  if (s.lighting_presets.size() > 1) {
    const auto c = render(s, p, s.lighting(1), cfg);
    CHECK(c.second == a.second);
    CHECK_FALSE(c.first == a.first);
  }
}

TEST_CASE("render rejects out-of-bounds cameras and bad configs") {
  const Scene s = generate_scene(2, SceneConfig{});
  CHECK_THROWS_AS(render(s, pose_at(-1.0, 2.0, 0.0), s.lighting(0), RenderConfig{}), OutOfBoundsError);
  RenderConfig bad;
  bad.fov_deg = 180.0;
  CHECK_THROWS_AS(render(s, pose_at(2.0, 2.0, 0.0), s.lighting(0), bad), ConfigError);
  CHECK_THROWS_AS(s.lighting(99), ConfigError);
}

TEST_CASE("png round trips") {
  TempDir dir("png");
  Image img(5, 3);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(i * 17);
  write_png(img, dir / "a.png");
  CHECK(read_png_rgb(dir / "a.png") == img);
  CategoryMap map(4, 2);
  map.ids = {-1, 0, 1, 2, 3, 4, 5, -1};
  write_png(map, dir / "b.png");
  CHECK(read_png_labels(dir / "b.png") == map);
  CHECK_THROWS(read_png_rgb(dir / "none.png"));
  const auto bytes = encode_png(img);
  REQUIRE(bytes.size() > 8);
  CHECK(bytes[1] == 'P');
}

TEST_CASE("base64") {
  auto enc = [](const std::string& s) { return base64_encode(std::vector<std::uint8_t>(s.begin(), s.end())); };
  CHECK(enc("") == "");
  CHECK(enc("M") == "TQ==");
  CHECK(enc("Ma") == "TWE=");
  CHECK(enc("Man") == "TWFu");
  CHECK(enc("hello world") == "aGVsbG8gd29ybGQ=");
}
