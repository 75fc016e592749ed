#include "teleop/leader_device.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace teleop {

void DeviceLimits::validate() const {
  if (!(max_force > 0.0) || !(max_grasp_force > 0.0) || !(workspace_diameter > 0.0) ||
      !(workspace_height > 0.0)) {
    throw std::invalid_argument("device limits must all be positive");
  }
}

void DeviceParams::validate() const {
  limits.validate();
  if (!(time_constant > 0.0)) {
    throw std::invalid_argument("device time constant must be positive");
  }
}

Vec3 clamp_to_workspace(const Vec3& pos, const DeviceLimits& limits) {
  Vec3 out = pos;
  const double radius = 0.5 * limits.workspace_diameter;
  const double r = std::hypot(pos.x(), pos.y());
  if (r > radius) {
    out.x() = pos.x() * (radius / r);
    out.y() = pos.y() * (radius / r);
  }
  const double half_h = 0.5 * limits.workspace_height;
  out.z() = std::clamp(pos.z(), -half_h, half_h);
  return out;
}

Vec3 saturate_force(const Vec3& force, const DeviceLimits& limits) {
  const double n = force.norm();
  if (n <= limits.max_force) return force;
  return force * (limits.max_force / n);
}

LeaderState device_step(const LeaderState& state, const Vec3& operator_target, bool grip_cmd,
                        const Vec3& feedback, double dt, const DeviceParams& params) {
  if (!(dt > 0.0)) throw std::invalid_argument("device_step: dt must be positive");
  const Vec3 target = clamp_to_workspace(operator_target, params.limits);
  const double alpha = -std::expm1(-dt / params.time_constant);
  LeaderState next;
  next.pos = state.pos + (target - state.pos) * alpha;
  // The workspace is convex, so a convex combination of two interior points
  // stays inside; the clamp only absorbs rounding at the boundary.
  next.pos = clamp_to_workspace(next.pos, params.limits);
  next.vel = (next.pos - state.pos) / dt;
  next.grip_closed = grip_cmd;
  next.feedback_force = saturate_force(feedback, params.limits);
  return next;
}

}  // namespace teleop
