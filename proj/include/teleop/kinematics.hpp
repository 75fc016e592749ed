#pragma once

#include "teleop/types.hpp"

#include <array>
#include <stdexcept>

namespace teleop {

// Joint order: shoulder abduction, shoulder flexion, humeral rotation,
// elbow flexion, forearm pronation, wrist flexion. Zero pose is the arm
// hanging straight down in a right-handed frame with +z up and +x forward.
struct JointLimits {
  Joints lower = (Joints() << -0.5, -0.5, -1.2, 0.0, -1.5, -1.0).finished();
  Joints upper = (Joints() << 2.0, 2.8, 1.2, 2.4, 1.5, 1.0).finished();

  bool contains(const Joints& q) const;
  Joints clamp(const Joints& q) const;
  void validate() const;
};

struct KinematicParams {
  Vec3 shoulder_origin = Vec3(0.0, 0.0, 1.0);
  double upper_length = 0.30;
  double fore_length = 0.25;
  double upper_mass = 2.0;
  double fore_mass = 1.5;
  double com_ratio = 0.45;
  double gravity = 9.81;
  JointLimits limits;

  void validate() const;
};

struct GraspablePoints {
  Vec3 elbow = Vec3::Zero();
  Vec3 wrist = Vec3::Zero();

  const Vec3& at(PointId p) const { return p == PointId::Elbow ? elbow : wrist; }
};

// Thrown when a configuration lies outside the joint limits.
class JointLimitError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

GraspablePoints forward_kinematics(const Joints& q, const KinematicParams& p);

// Column i is d(point)/dq_i.
PointJacobian point_jacobian(const Joints& q, PointId point, const KinematicParams& p);

// Generalized gravity force -dU/dq for the two point-mass segments.
Joints gravity_torques(const Joints& q, const KinematicParams& p);

// Total gravitational potential energy of the two segments.
double potential_energy(const Joints& q, const KinematicParams& p);

// World-frame unit axis of every joint at configuration q, plus a point on it.
struct JointAxes {
  std::array<Vec3, kNumJoints> axis;
  std::array<Vec3, kNumJoints> origin;
};
JointAxes joint_axes(const Joints& q, const KinematicParams& p);

}  // namespace teleop
