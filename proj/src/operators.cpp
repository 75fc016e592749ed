#include "teleop/operators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace teleop {

Vec3 min_jerk(const Vec3& x0, const Vec3& xf, double T, double t) {
  if (!(T > 0.0)) throw std::invalid_argument("min_jerk: T must be positive");
  const double s = std::clamp(t / T, 0.0, 1.0);
  const double s3 = s * s * s;
  return x0 + (xf - x0) * (s3 * (10.0 - 15.0 * s + 6.0 * s * s));
}

Vec3 min_jerk_velocity(const Vec3& x0, const Vec3& xf, double T, double t) {
  if (!(T > 0.0)) throw std::invalid_argument("min_jerk_velocity: T must be positive");
  if (t <= 0.0 || t >= T) return Vec3::Zero();
  const double s = t / T;
  const double s2 = s * s;
  return (xf - x0) * (s2 * (30.0 - 60.0 * s + 30.0 * s2) / T);
}

void TrainerParams::validate() const {
  if (!(approach_s > 0.0) || !(transport_s > 0.0)) {
    throw std::invalid_argument("trainer segment durations must be positive");
  }
  if (!(settle_tol > 0.0) || !(settle_s >= 0.0) || !(hold_timeout_s > settle_s)) {
    throw std::invalid_argument("trainer settle parameters are inconsistent");
  }
  if (!(release_s >= 0.0) || !(grab_timeout_s > 0.0)) {
    throw std::invalid_argument("trainer release/grab timings must be non-negative");
  }
  if (!(grab_radius > 0.0)) throw std::invalid_argument("trainer grab radius must be positive");
}

std::string_view to_string(TrainerPhase p) {
  switch (p) {
    case TrainerPhase::Idle:
      return "idle";
    case TrainerPhase::Approach:
      return "approach";
    case TrainerPhase::Grab:
      return "grab";
    case TrainerPhase::Transport:
      return "transport";
    case TrainerPhase::Hold:
      return "hold";
    case TrainerPhase::Release:
      return "release";
    case TrainerPhase::SwitchPoint:
      return "switch_point";
  }
  return "?";
}

namespace {

bool trial_active(TrialPhase p) {
  return p == TrialPhase::ShowTarget || p == TrialPhase::Reaching || p == TrialPhase::Holding ||
         p == TrialPhase::ReturnToBase;
}

double point_error(const WorldView& v, PointId p) {
  return (v.points.at(p) - v.target.target_for(p)).norm();
}

void enter(TrainerState& s, TrainerPhase phase, double t) {
  s.phase = phase;
  s.phase_t0 = t;
}

}  // namespace

TrainerStep trainer_policy_step(const TrainerState& state, const WorldView& view, double t,
                                const TrainerParams& params, const FrameMap& map) {
  TrainerState s = state;
  const Vec3 mapped = map_leader_to_follower(view.leader_pos, map);

  if (!trial_active(view.phase)) {
    s.phase = TrainerPhase::Idle;
    s.grip = false;
    s.settled_since.reset();
    return {s, {s.command, false}};
  }

  if (s.phase == TrainerPhase::Idle) enter(s, TrainerPhase::SwitchPoint, t);

  // A few transitions fall through to the next phase within the same tick.
  for (int guard = 0; guard < 4; ++guard) {
    const TrainerPhase before = s.phase;
    switch (s.phase) {
      case TrainerPhase::Idle:
        break;

      case TrainerPhase::SwitchPoint: {
        s.grip = false;
        // Leave a matched pose alone while its hold timer runs.
        if (view.phase == TrialPhase::Holding) break;
        PointId p = params.first_point;
        if (s.last_point) {
          p = other(*s.last_point);
          if (point_error(view, p) <= params.settle_tol) p = *s.last_point;
        }
        if (point_error(view, PointId::Elbow) <= params.settle_tol &&
            point_error(view, PointId::Wrist) <= params.settle_tol) {
          break;
        }
        s.point = p;
        s.seg_start = view.leader_pos;
        s.seg_t0 = t;
        s.seg_T = params.approach_s;
        enter(s, TrainerPhase::Approach, t);
        break;
      }

      case TrainerPhase::Approach: {
        s.grip = false;
        if (view.phase == TrialPhase::Holding) {
          enter(s, TrainerPhase::SwitchPoint, t);
          s.command = view.leader_pos;
          break;
        }
        s.seg_end = map_follower_to_leader(view.points.at(s.point), map);
        s.command = min_jerk(s.seg_start, s.seg_end, s.seg_T, t - s.seg_t0);
        const double d_target = (mapped - view.points.at(s.point)).norm();
        const double d_other = (mapped - view.points.at(other(s.point))).norm();
        if (t - s.seg_t0 >= s.seg_T && d_target <= params.grab_radius && d_target < d_other) {
          s.grip = true;
          enter(s, TrainerPhase::Grab, t);
        }
        break;
      }

      case TrainerPhase::Grab:
        s.grip = true;
        if (view.grab.engaged()) {
          s.point = view.grab.point;
          s.seg_start = view.leader_pos;
          s.seg_end = map_follower_to_leader(view.target.target_for(s.point), map);
          s.seg_t0 = t;
          s.seg_T = params.transport_s;
          enter(s, TrainerPhase::Transport, t);
        } else if (t - s.phase_t0 >= params.grab_timeout_s) {
          s.grip = false;
          enter(s, TrainerPhase::Release, t);
        }
        break;

      case TrainerPhase::Transport:
        if (!view.grab.engaged()) {
          s.grip = false;
          enter(s, TrainerPhase::SwitchPoint, t);
          break;
        }
        s.grip = true;
        s.command = min_jerk(s.seg_start, s.seg_end, s.seg_T, t - s.seg_t0);
        if (t - s.seg_t0 >= s.seg_T) {
          s.settled_since.reset();
          enter(s, TrainerPhase::Hold, t);
        }
        break;

      case TrainerPhase::Hold: {
        if (!view.grab.engaged()) {
          s.grip = false;
          s.last_point = s.point;
          enter(s, TrainerPhase::SwitchPoint, t);
          break;
        }
        s.grip = true;
        s.command = s.seg_end;
        if (point_error(view, s.point) <= params.settle_tol) {
          if (!s.settled_since) s.settled_since = t;
        } else {
          s.settled_since.reset();
        }
        if (view.phase == TrialPhase::Holding) break;
        const bool settled = s.settled_since && t - *s.settled_since >= params.settle_s;
        if (settled || t - s.phase_t0 >= params.hold_timeout_s) {
          s.grip = false;
          s.last_point = s.point;
          enter(s, TrainerPhase::Release, t);
        }
        break;
      }

      case TrainerPhase::Release:
        s.grip = false;
        if (t - s.phase_t0 >= params.release_s) enter(s, TrainerPhase::SwitchPoint, t);
        break;
    }
    if (s.phase == before) break;
    // Grab and Release must be visible for at least one tick.
    if (s.phase == TrainerPhase::Grab || s.phase == TrainerPhase::Release) break;
  }
  return {s, {s.command, s.grip}};
}

void TraineeParams::validate() const {
  if (!(reaction_s >= 0.0)) throw std::invalid_argument("trainee reaction time must be >= 0");
  if (!(kp.array() >= 0.0).all() || !(kd.array() >= 0.0).all()) {
    throw std::invalid_argument("trainee gains must be non-negative");
  }
  if (!(imitation_noise >= 0.0) || !(correction_s > 0.0)) {
    throw std::invalid_argument("trainee noise must be >= 0 and correction time positive");
  }
  if (!(self_support >= 0.0 && self_support <= 1.0)) {
    throw std::invalid_argument("trainee self_support must lie in [0, 1]");
  }
}

Joints vd_trainee_policy(const Joints& q, const Joints& qdot, const PoseTarget& target, double t,
                         const TraineeParams& params, const Joints& imitation_error) {
  if (t < params.reaction_s) return Joints::Zero();
  const double decay = std::exp(-(t - params.reaction_s) / params.correction_s);
  const Joints goal = target.q_target + imitation_error * decay;
  return params.kp.cwiseProduct(goal - q) - params.kd.cwiseProduct(qdot);
}

Joints trainee_support_torques(const Joints& q, const TraineeParams& trainee,
                               const PlantParams& plant, const KinematicParams& kin) {
  return -trainee.self_support * (1.0 - plant.weight_comp) * gravity_torques(q, kin);
}

}  // namespace teleop
