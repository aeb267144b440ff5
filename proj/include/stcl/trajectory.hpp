#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stcl/pose.hpp"
#include "stcl/render.hpp"
#include "stcl/scene.hpp"

namespace stcl {

enum class NavCommand { Forward, Backward, StrafeLeft, StrafeRight, RotateLeft, RotateRight, Jump, Idle };
inline constexpr std::size_t kNavCommandCount = 8;

std::string_view to_string(NavCommand cmd);
/// Throws ValidationError for unknown names.
NavCommand parse_command(std::string_view name);

struct MotionParams {
  double step_len = 0.1;     // m per translation command
  double rot_step = 5.0;     // degrees per rotation command
  double jump_height = 0.3;  // m above eye height at the arc apex
  int jump_steps = 6;        // steps from take-off to landing; must be even
  double agent_radius = 0.2; // m
  double eye_height = 1.5;   // m, camera height when grounded
  double dt = 0.1;           // s per step

  void validate() const;
  bool operator==(const MotionParams&) const = default;
};

struct MoveResult {
  Pose pose;
  bool blocked = false;  // the translation was rejected by collision
};

/// Advances the agent by one step. Yaw grows toward the camera's right, so
/// rotate_right adds rot_step and strafe_right moves along yaw + 90 degrees.
/// Moves whose body would collide keep the previous horizontal position.
MoveResult step_agent(const Scene& scene, const Pose& pose, NavCommand cmd, const MotionParams& params);

inline Pose apply_command(const Scene& scene, const Pose& pose, NavCommand cmd, const MotionParams& params) {
  return step_agent(scene, pose, cmd, params).pose;
}

/// Height of the jump arc above eye height at `phase` of `steps`.
double jump_offset(int phase, int steps, double height);

/// Whole-body collision test: is_free at the eye point and at sample heights
/// down to the floor, spaced no more than one radius apart.
bool agent_fits(const Scene& scene, Vec3 eye, double radius);

struct WalkPolicy {
  /// Indexed by NavCommand.
  std::array<double, kNavCommandCount> probabilities{0.70, 0.0, 0.02, 0.02, 0.12, 0.12, 0.01, 0.01};
  /// Probability of repeating the previous command (not applied after a blocked move).
  double persistence = 0.92;

  void validate() const;
  bool operator==(const WalkPolicy&) const = default;
};

struct Trajectory {
  std::int64_t scene_seed = 0;
  double dt = 0.1;
  std::vector<Pose> poses;
  std::vector<int> lighting_schedule;  // preset id per pose
  std::vector<NavCommand> commands;    // command that produced each pose (idle for the first)

  bool operator==(const Trajectory&) const = default;
};

/// Deterministic random walk of exactly n_steps poses.
Trajectory random_walk(const Scene& scene, std::uint64_t seed, int n_steps, const MotionParams& params,
                       const WalkPolicy& policy);

/// Preset id for each step: `base` throughout when period == 0, otherwise
/// cycling through presets every `period` steps starting at `base`.
std::vector<int> lighting_schedule(std::size_t n, int base, int period, int preset_count);

/// Human-readable list of invariant violations; empty when valid.
std::vector<std::string> validate_trajectory(const Scene& scene, const Trajectory& traj, const MotionParams& params);

/// One JSON object per line: step, t, pos, yaw, light, cmd, scene_seed.
std::string to_jsonl(const Trajectory& traj);
Trajectory trajectory_from_jsonl(const std::string& text, double default_dt = 0.1);
void save_trajectory(const Trajectory& traj, const std::string& path);
Trajectory load_trajectory(const std::string& path, double default_dt = 0.1);

/// Rendered frames of a trajectory in step order.
struct Dataset {
  Scene scene;
  Trajectory trajectory;
  RenderConfig render;
  std::vector<Image> frames;
  std::vector<CategoryMap> labels;

  std::size_t size() const { return frames.size(); }
};

/// Renders every pose under its scheduled preset (or `light_override`).
/// Frames may be rendered on `jobs` threads; output order is step order.
/// Throws ValidationError if the trajectory was recorded in another scene.
Dataset replay(const Scene& scene, const Trajectory& traj, const RenderConfig& config, int jobs = 1,
               std::optional<int> light_override = std::nullopt);

/// Directory layout: manifest.json, scene.json, trajectory.jsonl,
/// frames/frame_%06d.png, labels/label_%06d.png.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace stcl
