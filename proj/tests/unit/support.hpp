#pragma once

#include "teleop/kinematics.hpp"
#include "teleop/rng.hpp"

#include <filesystem>
#include <string>

namespace teleop::testing {

inline Joints random_joints(Xoshiro256& rng, const JointLimits& lim = {}) {
  Joints q;
  for (int i = 0; i < kNumJoints; ++i) q[i] = rng.uniform(lim.lower[i], lim.upper[i]);
  return q;
}

inline Vec3 random_vec(Xoshiro256& rng, double lo, double hi) {
  return Vec3(rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi));
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("teleop_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace teleop::testing

#include "teleop/coupling.hpp"
#include "teleop/follower_plant.hpp"

#include <vector>

namespace teleop::testing {

// Engaged elbow, fixed leader, full weight compensation, passive trainee.
// Returns the graspable-point error after every plant step.
inline std::vector<double> engaged_convergence_errors(double seconds) {
  KinematicParams kin;
  FrameMap map;
  CouplingParams coupling;
  PlantParams plant;
  plant.weight_comp = 1.0;
  const Joints q0 = (Joints() << 0.1, 0.3, 0.0, 0.9, 0.0, 0.0).finished();
  const Joints q_goal = (Joints() << 0.3, 0.55, 0.0, 0.9, 0.0, 0.0).finished();
  const Vec3 goal = forward_kinematics(q_goal, kin).elbow;

  ControllerInput in;
  in.leader_pos = map_follower_to_leader(goal, map);
  in.leader_vel = Vec3::Zero();
  in.grip_closed = true;
  CouplingState state;
  FollowerState fs;
  fs.q = q0;
  std::vector<double> errors;
  const auto steps = static_cast<int>(seconds / plant.dt + 0.5);
  for (int k = 0; k < steps; ++k) {
    in.q = fs.q;
    in.qdot = fs.qdot;
    const ControllerOutput out = controller_step(state, in, map, coupling, kin);
    state = out.state;
    if (!state.grab.engaged_at(PointId::Elbow)) return {};
    fs = plant_step(fs, out.tau, Joints::Zero(), plant, kin);
    errors.push_back((forward_kinematics(fs.q, kin).elbow - goal).norm());
  }
  return errors;
}

}  // namespace teleop::testing
