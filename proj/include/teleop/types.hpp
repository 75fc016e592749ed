#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string_view>

namespace teleop {

using Vec3 = Eigen::Vector3d;
using Joints = Eigen::Matrix<double, 6, 1>;
using PointJacobian = Eigen::Matrix<double, 3, 6>;

inline constexpr int kNumJoints = 6;

// The two graspable points on the follower arm.
enum class PointId : std::uint8_t { Elbow = 0, Wrist = 1 };

constexpr std::string_view to_string(PointId p) {
  return p == PointId::Elbow ? "elbow" : "wrist";
}

constexpr PointId other(PointId p) {
  return p == PointId::Elbow ? PointId::Wrist : PointId::Elbow;
}

}  // namespace teleop
