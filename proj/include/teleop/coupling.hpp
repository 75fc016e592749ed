#pragma once

#include "teleop/kinematics.hpp"
#include "teleop/types.hpp"

#include <numbers>
#include <string_view>
#include <utility>

namespace teleop {

// Leader-to-follower frame overlay: X' = Rz(theta) * X * scale + offset.
// rotation_sign = -1 flips the rotation sense (row-vector reading of the
// transform).
struct FrameMap {
  double theta = std::numbers::pi / 4.0;
  double scale = 10.0;
  Vec3 offset = Vec3(0.34, 0.0, 1.0);
  int rotation_sign = 1;

  Eigen::Matrix3d rotation() const;
  void validate() const;
};

struct CouplingGains {
  double leader_stiffness = 30.0;     // N/m
  double leader_damping = 0.1;        // N s/m
  double follower_stiffness = 80.0;   // N/m
  double follower_damping = 4.0;      // N s/m

  void validate() const;
};

struct CouplingParams {
  CouplingGains gains;
  double grab_radius = 0.10;    // m
  double torque_limit = 30.0;   // N m per joint
  double breakaway = 0.0;       // m; 0 disables the safety breakaway

  void validate() const;
};

enum class GrabPhase : std::uint8_t { Free = 0, Near = 1, Engaged = 2 };

struct GrabState {
  GrabPhase phase = GrabPhase::Free;
  PointId point = PointId::Elbow;  // meaningful for Near/Engaged only

  bool engaged() const { return phase == GrabPhase::Engaged; }
  bool engaged_at(PointId p) const { return engaged() && point == p; }
  friend bool operator==(const GrabState&, const GrabState&) = default;
};

// Stable textual form used in logs: "free", "near:elbow", "engaged:wrist".
std::string_view to_string(const GrabState& g);
GrabState parse_grab_state(std::string_view text);

struct CouplingState {
  GrabState grab;
  bool grip_was_closed = false;
  double engaged_distance = 0.0;  // distance at the closing instant
  Vec3 last_leader_force = Vec3::Zero();    // leader frame
  Vec3 last_follower_force = Vec3::Zero();  // follower frame
  Joints last_tau = Joints::Zero();
};

Vec3 map_leader_to_follower(const Vec3& leader_pos, const FrameMap& map);
Vec3 map_follower_to_leader(const Vec3& follower_pos, const FrameMap& map);
// Derivative of the position map: Rz * scale * v.
Vec3 map_leader_velocity(const Vec3& leader_vel, const FrameMap& map);

// Grab state machine. Engagement happens only on a grip closing edge with
// the nearest graspable point within grab_radius; release only on grip
// opening (or breakaway, when enabled).
CouplingState update_grab_state(const CouplingState& state, const Vec3& mapped_pos,
                                bool grip_closed, const GraspablePoints& points,
                                const CouplingParams& params);

struct CouplingForces {
  Vec3 leader;    // F_s, still expressed in the follower frame
  Vec3 follower;  // F_a
};

CouplingForces coupling_forces(const Vec3& mapped_pos, const Vec3& mapped_vel,
                               const Vec3& point_pos, const Vec3& point_vel,
                               const CouplingGains& gains);

// Rotation only; forces are not scaled.
Vec3 rotate_force_to_leader(const Vec3& force, const FrameMap& map);

// tau = J^T F, each component clamped to +-torque_limit.
Joints force_to_torques(const PointJacobian& J, const Vec3& force, double torque_limit);

struct ControllerInput {
  Vec3 leader_pos = Vec3::Zero();
  Vec3 leader_vel = Vec3::Zero();
  bool grip_closed = false;
  Joints q = Joints::Zero();
  Joints qdot = Joints::Zero();
};

struct ControllerOutput {
  CouplingState state;
  Vec3 mapped_pos = Vec3::Zero();
  Vec3 mapped_vel = Vec3::Zero();
  GraspablePoints points;
  Vec3 leader_force = Vec3::Zero();    // F_s rotated into the leader frame
  Vec3 follower_force = Vec3::Zero();  // F_a, follower frame
  Joints tau = Joints::Zero();
};

// One controller tick: map the leader, run the grab machine, compute both
// coupling forces and the follower joint torques. With coupling disabled
// the grab machine stays Free and every output force is zero.
ControllerOutput controller_step(const CouplingState& state, const ControllerInput& in,
                                 const FrameMap& map, const CouplingParams& params,
                                 const KinematicParams& kin, bool coupling_enabled = true);

}  // namespace teleop
