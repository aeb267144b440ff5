#include "stcl/trajectory.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "stcl/error.hpp"
#include "stcl/image_io.hpp"
#include "stcl/rng.hpp"

namespace stcl {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr std::array<std::string_view, kNavCommandCount> kCommandNames{
    "forward", "backward", "strafe_left", "strafe_right", "rotate_left", "rotate_right", "jump", "idle"};

Vec3 translation(NavCommand cmd, double yaw, double step_len) {
  switch (cmd) {
    case NavCommand::Forward:
      return step_len * heading(yaw);
    case NavCommand::Backward:
      return -step_len * heading(yaw);
    case NavCommand::StrafeRight:
      return step_len * heading(yaw + 90.0);
    case NavCommand::StrafeLeft:
      return step_len * heading(yaw - 90.0);
    default:
      return {};
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace

std::string_view to_string(NavCommand cmd) { return kCommandNames[static_cast<std::size_t>(cmd)]; }

NavCommand parse_command(std::string_view name) {
  for (std::size_t i = 0; i < kNavCommandCount; ++i)
    if (kCommandNames[i] == name) return static_cast<NavCommand>(i);
  throw ValidationError("unknown command '" + std::string(name) + "'");
}

void MotionParams::validate() const {
  if (!(step_len > 0.0)) throw ConfigError("motion.step_len must be > 0");
  if (!(rot_step > 0.0 && rot_step < 360.0)) throw ConfigError("motion.rot_step must be in (0, 360)");
  if (!(jump_height >= 0.0)) throw ConfigError("motion.jump_height must be >= 0");
  if (jump_steps < 2 || jump_steps % 2 != 0) throw ConfigError("motion.jump_steps must be even and >= 2");
  if (!(agent_radius > 0.0)) throw ConfigError("motion.agent_radius must be > 0");
  if (!(eye_height > 0.0)) throw ConfigError("motion.eye_height must be > 0");
  if (!(dt > 0.0)) throw ConfigError("motion.dt must be > 0");
}

void WalkPolicy::validate() const {
  double total = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0)) throw ConfigError("walk probabilities must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("walk probabilities must sum to 1");
  if (!(persistence >= 0.0 && persistence <= 1.0)) throw ConfigError("walk.persistence must be in [0, 1]");
}

double jump_offset(int phase, int steps, double height) {
  if (phase <= 0 || phase >= steps) return 0.0;
  const double s = static_cast<double>(steps);
  return 4.0 * height * phase * (steps - phase) / (s * s);
}

bool agent_fits(const Scene& scene, Vec3 eye, double radius) {
  if (!is_free(scene, eye, radius)) return false;
  for (double z = eye.z - radius; z > 0.0; z -= radius)
    if (!is_free(scene, {eye.x, eye.y, std::max(z, radius)}, radius)) return false;
  return true;
}

MoveResult step_agent(const Scene& scene, const Pose& pose, NavCommand cmd, const MotionParams& params) {
  MoveResult r;
  Pose& next = r.pose;
  next = pose;
  next.step = pose.step + 1;
  next.t = static_cast<double>(next.step) * params.dt;

  if (cmd == NavCommand::RotateRight) next.yaw = wrap_degrees(pose.yaw + params.rot_step);
  if (cmd == NavCommand::RotateLeft) next.yaw = wrap_degrees(pose.yaw - params.rot_step);

  if (pose.jump_phase > 0) {
    next.jump_phase = pose.jump_phase + 1 >= params.jump_steps ? 0 : pose.jump_phase + 1;
  } else if (cmd == NavCommand::Jump) {
    next.jump_phase = 1;
  }
  const double z = params.eye_height + jump_offset(next.jump_phase, params.jump_steps, params.jump_height);

  const Vec3 move = translation(cmd, pose.yaw, params.step_len);
  const Vec3 full{pose.position.x + move.x, pose.position.y + move.y, z};
  const Vec3 vertical{pose.position.x, pose.position.y, z};
  const bool translating = move.x != 0.0 || move.y != 0.0;
  if (agent_fits(scene, full, params.agent_radius)) {
    next.position = full;
  } else {
    r.blocked = translating;
    next.position = agent_fits(scene, vertical, params.agent_radius) ? vertical : pose.position;
  }
  return r;
}

Trajectory random_walk(const Scene& scene, std::uint64_t seed, int n_steps, const MotionParams& params,
                       const WalkPolicy& policy) {
  if (n_steps < 1) throw ConfigError("trajectory length must be >= 1");
  params.validate();
  policy.validate();
  Rng rng(seed);
  Trajectory traj;
  traj.scene_seed = scene.seed;
  traj.dt = params.dt;

  Pose start;
  bool placed = false;
  const auto headings = static_cast<std::uint64_t>(std::max(1.0, std::floor(360.0 / params.rot_step)));
  for (int attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
    start.position = {rng.uniform(scene.bounds.min_x, scene.bounds.max_x),
                      rng.uniform(scene.bounds.min_y, scene.bounds.max_y), params.eye_height};
    start.yaw = wrap_degrees(static_cast<double>(rng.below(headings)) * params.rot_step);
    placed = agent_fits(scene, start.position, params.agent_radius);
  }
  if (!placed) {
    throw PlacementError("no free start pose after " + std::to_string(kPlacementRetries) + " attempts (walk seed " +
                             std::to_string(seed) + ")",
                         static_cast<long long>(seed));
  }
  traj.poses.push_back(start);
  traj.commands.push_back(NavCommand::Idle);

  NavCommand last = NavCommand::Idle;
  bool last_blocked = true;
  while (static_cast<int>(traj.poses.size()) < n_steps) {
    NavCommand cmd;
    if (!last_blocked && rng.bernoulli(policy.persistence)) {
      cmd = last;
    } else {
      double u = rng.uniform();
      std::size_t k = 0;
      while (k + 1 < kNavCommandCount && u >= policy.probabilities[k]) u -= policy.probabilities[k++];
      cmd = static_cast<NavCommand>(k);
    }
    const MoveResult mr = step_agent(scene, traj.poses.back(), cmd, params);
    traj.poses.push_back(mr.pose);
    traj.commands.push_back(cmd);
    last = cmd;
    last_blocked = mr.blocked;
  }
  traj.lighting_schedule.assign(traj.poses.size(), scene.lighting_presets.empty() ? 0 : scene.lighting_presets[0].id);
  return traj;
}

std::vector<int> lighting_schedule(std::size_t n, int base, int period, int preset_count) {
  std::vector<int> out(n, base);
  if (period > 0 && preset_count > 0) {
    for (std::size_t i = 0; i < n; ++i)
      out[i] = static_cast<int>((base + static_cast<long long>(i) / period) % preset_count);
  }
  return out;
}

std::vector<std::string> validate_trajectory(const Scene& scene, const Trajectory& traj, const MotionParams& params) {
  std::vector<std::string> errors;
  auto fail = [&](std::size_t i, const std::string& msg) {
    errors.push_back("pose " + std::to_string(i) + ": " + msg);
  };
  if (traj.scene_seed != scene.seed) {
    errors.push_back("trajectory scene_seed " + std::to_string(traj.scene_seed) + " != scene seed " +
                     std::to_string(scene.seed));
  }
  if (traj.lighting_schedule.size() != traj.poses.size()) errors.push_back("lighting schedule length mismatch");
  const double max_step = params.step_len + params.jump_height + 1e-9;
  for (std::size_t i = 0; i < traj.poses.size(); ++i) {
    const Pose& p = traj.poses[i];
    if (p.step != static_cast<std::int64_t>(i)) fail(i, "step is " + std::to_string(p.step));
    if (p.t != static_cast<double>(p.step) * traj.dt) fail(i, "t != step * dt");
    if (!(p.yaw >= 0.0 && p.yaw < 360.0)) fail(i, "yaw outside [0, 360)");
    if (!is_free(scene, p.position, params.agent_radius)) fail(i, "position is not free at agent radius");
    if (i > 0 && norm(p.position - traj.poses[i - 1].position) > max_step) fail(i, "displacement exceeds motion limits");
    if (i < traj.lighting_schedule.size()) {
      const int id = traj.lighting_schedule[i];
      bool known = false;
      for (const auto& l : scene.lighting_presets) known = known || l.id == id;
      if (!known) fail(i, "unknown lighting preset " + std::to_string(id));
    }
  }
  return errors;
}

std::string to_jsonl(const Trajectory& traj) {
  std::string out;
  for (std::size_t i = 0; i < traj.poses.size(); ++i) {
    const Pose& p = traj.poses[i];
    json j;
    j["step"] = p.step;
    j["t"] = p.t;
    j["pos"] = {p.position.x, p.position.y, p.position.z};
    j["yaw"] = p.yaw;
    j["light"] = i < traj.lighting_schedule.size() ? traj.lighting_schedule[i] : 0;
    j["cmd"] = std::string(to_string(i < traj.commands.size() ? traj.commands[i] : NavCommand::Idle));
    j["scene_seed"] = traj.scene_seed;
    out += j.dump();
    out += '\n';
  }
  return out;
}

Trajectory trajectory_from_jsonl(const std::string& text, double default_dt) {
  Trajectory traj;
  traj.dt = default_dt;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const json j = json::parse(line);
      Pose p;
      p.step = j.at("step").get<std::int64_t>();
      p.t = j.at("t").get<double>();
      const auto& pos = j.at("pos");
      p.position = {pos.at(0).get<double>(), pos.at(1).get<double>(), pos.at(2).get<double>()};
      p.yaw = j.at("yaw").get<double>();
      traj.poses.push_back(p);
      traj.lighting_schedule.push_back(j.at("light").get<int>());
      traj.commands.push_back(parse_command(j.at("cmd").get<std::string>()));
      traj.scene_seed = j.value("scene_seed", std::int64_t{0});
    }
  } catch (const json::exception& e) {
    throw ValidationError("malformed trajectory record on line " + std::to_string(lineno) + ": " + e.what());
  }
  if (traj.poses.size() >= 2 && traj.poses[1].step == 1) traj.dt = traj.poses[1].t;
  return traj;
}

void save_trajectory(const Trajectory& traj, const std::string& path) { write_file(path, to_jsonl(traj)); }

Trajectory load_trajectory(const std::string& path, double default_dt) {
  return trajectory_from_jsonl(read_file(path), default_dt);
}

Dataset replay(const Scene& scene, const Trajectory& traj, const RenderConfig& config, int jobs,
               std::optional<int> light_override) {
  config.validate();
  if (traj.scene_seed != scene.seed) {
    throw ValidationError("trajectory was recorded in scene " + std::to_string(traj.scene_seed) +
                          " but replay scene has seed " + std::to_string(scene.seed));
  }
  Dataset ds;
  ds.scene = scene;
  ds.trajectory = traj;
  ds.render = config;
  if (light_override) ds.trajectory.lighting_schedule.assign(traj.poses.size(), *light_override);
  if (ds.trajectory.lighting_schedule.size() != traj.poses.size())
    throw ValidationError("lighting schedule length does not match pose count");
  const std::size_t n = traj.poses.size();
  ds.frames.resize(n);
  ds.labels.resize(n);
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < n; i += stride) {
      auto [img, ids] = render(scene, traj.poses[i], scene.lighting(ds.trajectory.lighting_schedule[i]), config);
      ds.frames[i] = std::move(img);
      ds.labels[i] = std::move(ids);
    }
  };
  const std::size_t workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "frames");
  fs::create_directories(fs::path(dir) / "labels");
  save_scene(ds.scene, (fs::path(dir) / "scene.json").string());
  save_trajectory(ds.trajectory, (fs::path(dir) / "trajectory.jsonl").string());
  char name[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::snprintf(name, sizeof(name), "frame_%06zu.png", i);
    write_png(ds.frames[i], (fs::path(dir) / "frames" / name).string());
    std::snprintf(name, sizeof(name), "label_%06zu.png", i);
    write_png(ds.labels[i], (fs::path(dir) / "labels" / name).string());
  }
  json m;
  m["scene"] = "scene.json";
  m["trajectory"] = "trajectory.jsonl";
  m["width"] = ds.render.width;
  m["height"] = ds.render.height;
  m["fov"] = ds.render.fov_deg;
  m["frames"] = ds.size();
  write_file((fs::path(dir) / "manifest.json").string(), m.dump(2) + "\n");
}

Dataset load_dataset(const std::string& dir) {
  const fs::path root(dir);
  const fs::path manifest = root / "manifest.json";
  if (!fs::exists(manifest)) throw IoError("missing dataset manifest: " + manifest.string());
  json m;
  try {
    m = json::parse(read_file(manifest.string()));
  } catch (const json::exception& e) {
    throw ValidationError("malformed manifest " + manifest.string() + ": " + e.what());
  }
  Dataset ds;
  ds.scene = load_scene((root / m.at("scene").get<std::string>()).string());
  ds.trajectory = load_trajectory((root / m.at("trajectory").get<std::string>()).string());
  ds.render = {m.at("width").get<int>(), m.at("height").get<int>(), m.at("fov").get<double>()};
  const std::size_t n = m.at("frames").get<std::size_t>();
  if (n != ds.trajectory.poses.size()) throw ValidationError("manifest frame count does not match trajectory");
  char name[64];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(name, sizeof(name), "frame_%06zu.png", i);
    ds.frames.push_back(read_png_rgb((root / "frames" / name).string()));
    std::snprintf(name, sizeof(name), "label_%06zu.png", i);
    ds.labels.push_back(read_png_labels((root / "labels" / name).string()));
  }
  return ds;
}

}  // namespace stcl
