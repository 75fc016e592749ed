#pragma once

#include "teleop/kinematics.hpp"

#include <stdexcept>

namespace teleop {

struct PlantParams {
  Joints joint_damping = Joints::Constant(4.0);     // N m s/rad
  double weight_comp = 0.65;                        // fraction of arm weight carried by the robot
  Joints baseline_viscous = Joints::Constant(0.2);  // residual friction of the transparent controller
  double dt = 0.002;                                // s

  void validate() const;
};

struct FollowerState {
  Joints q = Joints::Zero();
  Joints qdot = Joints::Zero();
  double t = 0.0;
};

// Raised when the plant receives a non-finite torque.
class PlantFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Zero-torque baseline controller: supports weight_comp of the arm's
// gravity load and leaves a small viscous residual.
Joints baseline_torques(const Joints& q, const Joints& qdot, const PlantParams& params,
                        const KinematicParams& kin);

// First-order admittance step. The net torque is coupling + voluntary +
// baseline + the gravity generalized force; qdot = net / damping.
// Axes that hit a joint limit are clamped and their velocity zeroed.
FollowerState plant_step(const FollowerState& state, const Joints& tau_coupling,
                         const Joints& tau_voluntary, const PlantParams& params,
                         const KinematicParams& kin);

}  // namespace teleop
