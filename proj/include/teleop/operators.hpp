#pragma once

#include "teleop/coupling.hpp"
#include "teleop/follower_plant.hpp"
#include "teleop/task_engine.hpp"

#include <optional>
#include <string_view>

namespace teleop {

// Minimum-jerk interpolation x0 -> xf over T; t is clamped to [0, T].
Vec3 min_jerk(const Vec3& x0, const Vec3& xf, double T, double t);
Vec3 min_jerk_velocity(const Vec3& x0, const Vec3& xf, double T, double t);

struct TrainerParams {
  double approach_s = 1.5;
  double transport_s = 2.5;
  double settle_tol = 0.05;   // m
  double settle_s = 0.5;
  double hold_timeout_s = 4.0;  // give up on a point that does not settle
  double release_s = 0.1;
  double grab_timeout_s = 0.2;
  double grab_radius = 0.10;
  PointId first_point = PointId::Elbow;

  void validate() const;
};

enum class TrainerPhase : std::uint8_t { Idle, Approach, Grab, Transport, Hold, Release, SwitchPoint };

std::string_view to_string(TrainerPhase p);

struct TrainerState {
  TrainerPhase phase = TrainerPhase::Idle;
  PointId point = PointId::Elbow;
  std::optional<PointId> last_point;
  Vec3 seg_start = Vec3::Zero();  // leader frame
  Vec3 seg_end = Vec3::Zero();    // leader frame
  double seg_t0 = 0.0;
  double seg_T = 1.0;
  double phase_t0 = 0.0;
  std::optional<double> settled_since;
  bool grip = false;
  Vec3 command = Vec3::Zero();  // last commanded leader target
};

// What the trainer sees in the virtual scene.
struct WorldView {
  GraspablePoints points;
  GrabState grab;
  PoseTarget target;  // the pose currently shown (base during the return)
  TrialPhase phase = TrialPhase::Done;
  Vec3 leader_pos = Vec3::Zero();  // device frame
};

struct OperatorCommand {
  Vec3 target = Vec3::Zero();  // leader frame
  bool grip = false;
};

struct TrainerStep {
  TrainerState state;
  OperatorCommand command;
};

// Scripted trainer: approach a graspable point, grab it, transport it to
// its target, hold until it settles (or the pose is being held), release,
// and move to the other point. Elbow first by default.
TrainerStep trainer_policy_step(const TrainerState& state, const WorldView& view, double t,
                                const TrainerParams& params, const FrameMap& map);

struct TraineeParams {
  double reaction_s = 0.8;
  Joints kp = Joints::Constant(8.0);  // N m/rad
  Joints kd = Joints::Constant(1.0);  // N m s/rad
  double imitation_noise = 0.15;      // rad, std of the per-trial imitation error
  double correction_s = 3.0;          // decay time of the imitation error
  double self_support = 1.0;          // share of the uncompensated arm weight the trainee carries

  void validate() const;
};

// VD imitation: zero before the reaction delay, then joint-space PD toward
// q_target (offset by an imitation error that decays with correction_s).
// `t` is time since the target was shown.
Joints vd_trainee_policy(const Joints& q, const Joints& qdot, const PoseTarget& target, double t,
                         const TraineeParams& params, const Joints& imitation_error = Joints::Zero());

// Torque with which the trainee carries the part of their own arm weight
// the exoskeleton leaves uncompensated.
Joints trainee_support_torques(const Joints& q, const TraineeParams& trainee,
                               const PlantParams& plant, const KinematicParams& kin);

}  // namespace teleop
