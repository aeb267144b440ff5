#pragma once

#include <cstdint>

#include "stcl/geometry.hpp"

namespace stcl {

/// Agent state at one recorded step. `position` is the eye point (z = height
/// above the floor), yaw is in [0, 360) degrees with 0 = +x and 90 = +y.
/// Turning right increases yaw: at yaw 0 the camera's right is +y.
struct Pose {
  std::int64_t step = 0;
  double t = 0.0;
  Vec3 position;
  double yaw = 0.0;
  /// Motion state: 0 on the ground, otherwise the index within the current
  /// jump arc. Not part of the recorded trajectory.
  int jump_phase = 0;

  bool operator==(const Pose&) const = default;
};

}  // namespace stcl
