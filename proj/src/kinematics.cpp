#include "teleop/kinematics.hpp"

#include <cmath>
#include <string>

namespace teleop {
namespace {

// Local rotation axis of each joint, expressed in its parent frame.
const std::array<Vec3, kNumJoints> kLocalAxes = {
    Vec3(-1, 0, 0),  // abduction swings the right arm toward -y
    Vec3(0, -1, 0),  // flexion swings the arm toward +x
    Vec3(0, 0, 1),   // humeral rotation about the upper-arm axis
    Vec3(0, -1, 0),  // elbow flexion
    Vec3(0, 0, 1),   // pronation about the forearm axis
    Vec3(0, -1, 0),  // wrist flexion
};

Eigen::Matrix3d joint_rotation(int i, double angle) {
  return Eigen::AngleAxisd(angle, kLocalAxes[static_cast<std::size_t>(i)]).toRotationMatrix();
}

struct ChainFrames {
  Eigen::Matrix3d shoulder;  // R1 R2 R3
  Eigen::Matrix3d forearm;   // shoulder * R4
  GraspablePoints points;
};

ChainFrames chain(const Joints& q, const KinematicParams& p) {
  ChainFrames f;
  f.shoulder = joint_rotation(0, q[0]) * joint_rotation(1, q[1]) * joint_rotation(2, q[2]);
  f.forearm = f.shoulder * joint_rotation(3, q[3]);
  f.points.elbow = p.shoulder_origin + f.shoulder * Vec3(0, 0, -p.upper_length);
  f.points.wrist = f.points.elbow + f.forearm * Vec3(0, 0, -p.fore_length);
  return f;
}

void require_in_limits(const Joints& q, const KinematicParams& p) {
  if (!p.limits.contains(q)) {
    for (int i = 0; i < kNumJoints; ++i) {
      if (!(q[i] >= p.limits.lower[i] && q[i] <= p.limits.upper[i])) {
        throw JointLimitError("joint q" + std::to_string(i + 1) + " = " + std::to_string(q[i]) +
                              " outside [" + std::to_string(p.limits.lower[i]) + ", " +
                              std::to_string(p.limits.upper[i]) + "]");
      }
    }
  }
}

PointJacobian jacobian_unchecked(const Joints& q, PointId point, const KinematicParams& p) {
  const JointAxes ax = joint_axes(q, p);
  const GraspablePoints pts = chain(q, p).points;
  const Vec3& target = pts.at(point);
  // Joints that precede the point; pronation and wrist flexion never move
  // the wrist centre, so their columns stay structurally zero.
  const int moving = point == PointId::Elbow ? 3 : 4;
  PointJacobian J = PointJacobian::Zero();
  for (int i = 0; i < moving; ++i) {
    const auto k = static_cast<std::size_t>(i);
    J.col(i) = ax.axis[k].cross(target - ax.origin[k]);
  }
  return J;
}

}  // namespace

bool JointLimits::contains(const Joints& q) const {
  return ((q.array() >= lower.array()) && (q.array() <= upper.array())).all();
}

Joints JointLimits::clamp(const Joints& q) const { return q.cwiseMax(lower).cwiseMin(upper); }

void JointLimits::validate() const {
  for (int i = 0; i < kNumJoints; ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i])) {
      throw std::invalid_argument("joint limits for q" + std::to_string(i + 1) +
                                  " must be finite with lower < upper");
    }
  }
}

void KinematicParams::validate() const {
  if (!(upper_length > 0.0) || !(fore_length > 0.0)) {
    throw std::invalid_argument("segment lengths must be positive");
  }
  if (!(upper_mass >= 0.0) || !(fore_mass >= 0.0)) {
    throw std::invalid_argument("segment masses must be non-negative");
  }
  if (!(com_ratio > 0.0 && com_ratio < 1.0)) {
    throw std::invalid_argument("com_ratio must lie in (0, 1)");
  }
  if (!shoulder_origin.allFinite() || !std::isfinite(gravity)) {
    throw std::invalid_argument("shoulder origin and gravity must be finite");
  }
  limits.validate();
}

JointAxes joint_axes(const Joints& q, const KinematicParams& p) {
  JointAxes ax;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  const ChainFrames f = chain(q, p);
  for (int i = 0; i < kNumJoints; ++i) {
    const auto k = static_cast<std::size_t>(i);
    ax.axis[k] = R * kLocalAxes[k];
    R = R * joint_rotation(i, q[i]);
  }
  ax.origin = {p.shoulder_origin, p.shoulder_origin, p.shoulder_origin,
               f.points.elbow,    f.points.wrist,    f.points.wrist};
  return ax;
}

GraspablePoints forward_kinematics(const Joints& q, const KinematicParams& p) {
  require_in_limits(q, p);
  return chain(q, p).points;
}

PointJacobian point_jacobian(const Joints& q, PointId point, const KinematicParams& p) {
  require_in_limits(q, p);
  return jacobian_unchecked(q, point, p);
}

double potential_energy(const Joints& q, const KinematicParams& p) {
  const GraspablePoints pts = chain(q, p).points;
  const double c = p.com_ratio;
  const double z_upper = p.shoulder_origin.z() + c * (pts.elbow.z() - p.shoulder_origin.z());
  const double z_fore = (1.0 - c) * pts.elbow.z() + c * pts.wrist.z();
  return p.gravity * (p.upper_mass * z_upper + p.fore_mass * z_fore);
}

Joints gravity_torques(const Joints& q, const KinematicParams& p) {
  require_in_limits(q, p);
  const double c = p.com_ratio;
  const Eigen::Matrix<double, 1, 6> dz_elbow = jacobian_unchecked(q, PointId::Elbow, p).row(2);
  const Eigen::Matrix<double, 1, 6> dz_wrist = jacobian_unchecked(q, PointId::Wrist, p).row(2);
  const Eigen::Matrix<double, 1, 6> dU =
      p.gravity * (p.upper_mass * c * dz_elbow + p.fore_mass * ((1.0 - c) * dz_elbow + c * dz_wrist));
  return -dU.transpose();
}

}  // namespace teleop
