#pragma once

#include "teleop/types.hpp"

namespace teleop {

// Leader haptic device limits. The workspace is a cylinder about +z
// centred on the device origin.
struct DeviceLimits {
  double max_force = 20.0;        // N, translational
  double max_grasp_force = 8.0;   // N, metadata only (gripper is binary)
  double workspace_diameter = 0.19;
  double workspace_height = 0.13;

  void validate() const;
};

struct DeviceParams {
  DeviceLimits limits;
  double time_constant = 0.02;  // first-order servo lag, s

  void validate() const;
};

struct LeaderState {
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
  bool grip_closed = false;
  Vec3 feedback_force = Vec3::Zero();
};

Vec3 clamp_to_workspace(const Vec3& pos, const DeviceLimits& limits);

Vec3 saturate_force(const Vec3& force, const DeviceLimits& limits);

// One servo step of the device toward the operator's commanded position.
// Throws std::invalid_argument when dt <= 0.
LeaderState device_step(const LeaderState& state, const Vec3& operator_target, bool grip_cmd,
                        const Vec3& feedback, double dt, const DeviceParams& params);

}  // namespace teleop
