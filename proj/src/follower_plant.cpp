#include "teleop/follower_plant.hpp"

namespace teleop {

void PlantParams::validate() const {
  if (!(joint_damping.array() > 0.0).all()) {
    throw std::invalid_argument("joint damping must be positive on every axis");
  }
  if (!(weight_comp >= 0.0 && weight_comp <= 1.0)) {
    throw std::invalid_argument("weight_comp must lie in [0, 1]");
  }
  if (!(baseline_viscous.array() >= 0.0).all()) {
    throw std::invalid_argument("baseline viscous friction must be non-negative");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("plant dt must be positive");
}

Joints baseline_torques(const Joints& q, const Joints& qdot, const PlantParams& params,
                        const KinematicParams& kin) {
  // gravity_torques is the load gravity applies; support opposes it.
  return -params.weight_comp * gravity_torques(q, kin) -
         params.baseline_viscous.cwiseProduct(qdot);
}

FollowerState plant_step(const FollowerState& state, const Joints& tau_coupling,
                         const Joints& tau_voluntary, const PlantParams& params,
                         const KinematicParams& kin) {
  if (!(params.dt > 0.0)) throw std::invalid_argument("plant_step: dt must be positive");
  if (!tau_coupling.allFinite() || !tau_voluntary.allFinite()) {
    throw PlantFault("plant_step: non-finite torque input at t=" + std::to_string(state.t));
  }
  const Joints net = tau_coupling + tau_voluntary +
                     baseline_torques(state.q, state.qdot, params, kin) +
                     gravity_torques(state.q, kin);

  FollowerState next;
  next.qdot = net.cwiseQuotient(params.joint_damping);
  const Joints unclamped = state.q + next.qdot * params.dt;
  next.q = kin.limits.clamp(unclamped);
  for (int i = 0; i < kNumJoints; ++i) {
    if (next.q[i] != unclamped[i]) next.qdot[i] = 0.0;
  }
  next.t = state.t + params.dt;
  return next;
}

}  // namespace teleop
