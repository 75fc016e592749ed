#include "teleop/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace teleop {

Eigen::Matrix3d FrameMap::rotation() const {
  return Eigen::AngleAxisd(rotation_sign * theta, Vec3::UnitZ()).toRotationMatrix();
}

void FrameMap::validate() const {
  if (!(scale > 0.0)) throw std::invalid_argument("frame map scale must be positive");
  if (rotation_sign != 1 && rotation_sign != -1) {
    throw std::invalid_argument("frame map rotation_sign must be +1 or -1");
  }
  if (!std::isfinite(theta) || !offset.allFinite()) {
    throw std::invalid_argument("frame map theta and offset must be finite");
  }
}

void CouplingGains::validate() const {
  if (!(leader_stiffness >= 0.0) || !(leader_damping >= 0.0) || !(follower_stiffness >= 0.0) ||
      !(follower_damping >= 0.0)) {
    throw std::invalid_argument("coupling gains must be non-negative");
  }
}

void CouplingParams::validate() const {
  gains.validate();
  if (!(grab_radius > 0.0)) throw std::invalid_argument("grab radius must be positive");
  if (!(torque_limit > 0.0)) throw std::invalid_argument("torque limit must be positive");
  if (!(breakaway >= 0.0)) throw std::invalid_argument("breakaway distance must be >= 0");
}

std::string_view to_string(const GrabState& g) {
  switch (g.phase) {
    case GrabPhase::Free:
      return "free";
    case GrabPhase::Near:
      return g.point == PointId::Elbow ? "near:elbow" : "near:wrist";
    case GrabPhase::Engaged:
      return g.point == PointId::Elbow ? "engaged:elbow" : "engaged:wrist";
  }
  return "free";
}

GrabState parse_grab_state(std::string_view text) {
  if (text == "free") return {};
  if (text == "near:elbow") return {GrabPhase::Near, PointId::Elbow};
  if (text == "near:wrist") return {GrabPhase::Near, PointId::Wrist};
  if (text == "engaged:elbow") return {GrabPhase::Engaged, PointId::Elbow};
  if (text == "engaged:wrist") return {GrabPhase::Engaged, PointId::Wrist};
  throw std::invalid_argument("unknown grab state '" + std::string(text) + "'");
}

Vec3 map_leader_to_follower(const Vec3& leader_pos, const FrameMap& map) {
  return map.rotation() * leader_pos * map.scale + map.offset;
}

Vec3 map_follower_to_leader(const Vec3& follower_pos, const FrameMap& map) {
  return map.rotation().transpose() * (follower_pos - map.offset) / map.scale;
}

Vec3 map_leader_velocity(const Vec3& leader_vel, const FrameMap& map) {
  return map.rotation() * leader_vel * map.scale;
}

CouplingState update_grab_state(const CouplingState& state, const Vec3& mapped_pos,
                                bool grip_closed, const GraspablePoints& points,
                                const CouplingParams& params) {
  CouplingState next = state;
  next.grip_was_closed = grip_closed;
  const bool closing = grip_closed && !state.grip_was_closed;

  const double d_elbow = (mapped_pos - points.elbow).norm();
  const double d_wrist = (mapped_pos - points.wrist).norm();
  const PointId nearest = d_wrist < d_elbow ? PointId::Wrist : PointId::Elbow;
  const double d_nearest = std::min(d_elbow, d_wrist);
  const bool in_range = d_nearest <= params.grab_radius;

  if (state.grab.engaged()) {
    const double d_engaged = (mapped_pos - points.at(state.grab.point)).norm();
    const bool broke_away = params.breakaway > 0.0 && d_engaged > params.breakaway;
    if (!grip_closed || broke_away) next.grab = GrabState{};
    return next;
  }

  if (closing && in_range) {
    next.grab = {GrabPhase::Engaged, nearest};
    next.engaged_distance = d_nearest;
  } else if (in_range && !grip_closed) {
    next.grab = {GrabPhase::Near, nearest};
  } else {
    next.grab = GrabState{};
  }
  return next;
}

CouplingForces coupling_forces(const Vec3& mapped_pos, const Vec3& mapped_vel,
                               const Vec3& point_pos, const Vec3& point_vel,
                               const CouplingGains& gains) {
  CouplingForces f;
  f.leader = -gains.leader_stiffness * (mapped_pos - point_pos) -
             gains.leader_damping * (mapped_vel - point_vel);
  f.follower = -gains.follower_stiffness * (point_pos - mapped_pos) -
               gains.follower_damping * (point_vel - mapped_vel);
  return f;
}

Vec3 rotate_force_to_leader(const Vec3& force, const FrameMap& map) {
  return map.rotation().transpose() * force;
}

Joints force_to_torques(const PointJacobian& J, const Vec3& force, double torque_limit) {
  const Joints tau = J.transpose() * force;
  return tau.cwiseMax(-torque_limit).cwiseMin(torque_limit);
}

ControllerOutput controller_step(const CouplingState& state, const ControllerInput& in,
                                 const FrameMap& map, const CouplingParams& params,
                                 const KinematicParams& kin, bool coupling_enabled) {
  ControllerOutput out;
  out.mapped_pos = map_leader_to_follower(in.leader_pos, map);
  out.mapped_vel = map_leader_velocity(in.leader_vel, map);
  out.points = forward_kinematics(in.q, kin);

  if (coupling_enabled) {
    out.state = update_grab_state(state, out.mapped_pos, in.grip_closed, out.points, params);
  } else {
    out.state = state;
    out.state.grab = GrabState{};
    out.state.grip_was_closed = in.grip_closed;
  }

  if (out.state.grab.engaged()) {
    const PointId p = out.state.grab.point;
    const PointJacobian J = point_jacobian(in.q, p, kin);
    const Vec3 point_vel = J * in.qdot;
    const CouplingForces f =
        coupling_forces(out.mapped_pos, out.mapped_vel, out.points.at(p), point_vel, params.gains);
    out.leader_force = rotate_force_to_leader(f.leader, map);
    out.follower_force = f.follower;
    out.tau = force_to_torques(J, f.follower, params.torque_limit);
  }
  out.state.last_leader_force = out.leader_force;
  out.state.last_follower_force = out.follower_force;
  out.state.last_tau = out.tau;
  return out;
}

}  // namespace teleop
