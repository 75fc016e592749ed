#include "teleop/task_engine.hpp"

#include "teleop/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace teleop {
namespace {

// Timestamps are produced on a microsecond grid; comparing elapsed time in
// integer microseconds keeps "held for exactly 3 s" exact.
std::int64_t to_us(double seconds) { return std::llround(seconds * 1e6); }

bool elapsed_at_least(double since, double now, double duration) {
  return to_us(now) - to_us(since) >= to_us(duration);
}

TaskEvent make_event(TaskEventKind kind, double t, const TrialSpec& spec) { return {kind, t, spec}; }

}  // namespace

std::string_view to_string(PoseId p) {
  switch (p) {
    case PoseId::Exult:
      return "exult";
    case PoseId::Drink:
      return "drink";
    case PoseId::Phone:
      return "phone";
    case PoseId::Hat:
      return "hat";
    case PoseId::Stop:
      return "stop";
    case PoseId::Base:
      return "base";
  }
  return "?";
}

PoseId parse_pose(std::string_view text) {
  for (int i = 0; i <= 5; ++i) {
    const auto p = static_cast<PoseId>(i);
    if (to_string(p) == text) return p;
  }
  throw std::invalid_argument("unknown pose '" + std::string(text) + "'");
}

std::string_view to_string(Condition c) { return c == Condition::VD ? "VD" : "HD"; }

Condition parse_condition(std::string_view text) {
  if (text == "VD" || text == "vd") return Condition::VD;
  if (text == "HD" || text == "hd") return Condition::HD;
  throw std::invalid_argument("unknown condition '" + std::string(text) + "'");
}

std::string_view to_string(TrialPhase p) {
  switch (p) {
    case TrialPhase::ShowTarget:
      return "show_target";
    case TrialPhase::Reaching:
      return "reaching";
    case TrialPhase::Holding:
      return "holding";
    case TrialPhase::Confirmed:
      return "confirmed";
    case TrialPhase::ReturnToBase:
      return "return_to_base";
    case TrialPhase::Done:
      return "done";
  }
  return "?";
}

TrialPhase parse_phase(std::string_view text) {
  for (int i = 0; i <= 5; ++i) {
    const auto p = static_cast<TrialPhase>(i);
    if (to_string(p) == text) return p;
  }
  throw std::invalid_argument("unknown trial phase '" + std::string(text) + "'");
}

std::string_view to_string(TaskEventKind k) {
  switch (k) {
    case TaskEventKind::TrialStarted:
      return "trial_started";
    case TaskEventKind::HoldStarted:
      return "hold_started";
    case TaskEventKind::HoldLost:
      return "hold_lost";
    case TaskEventKind::PoseConfirmed:
      return "pose_confirmed";
    case TaskEventKind::BaseReached:
      return "base_reached";
    case TaskEventKind::TrialTimedOut:
      return "trial_timed_out";
    case TaskEventKind::BaseTimedOut:
      return "base_timed_out";
    case TaskEventKind::TrialSkipped:
      return "trial_skipped";
  }
  return "?";
}

TaskEventKind parse_event_kind(std::string_view text) {
  for (int i = 1; i <= 8; ++i) {
    const auto k = static_cast<TaskEventKind>(i);
    if (to_string(k) == text) return k;
  }
  throw std::invalid_argument("unknown task event '" + std::string(text) + "'");
}

std::string_view to_string(ConditionOrder o) {
  return o == ConditionOrder::VdFirst ? "vd_first" : "hd_first";
}

ConditionOrder parse_condition_order(std::string_view text) {
  if (text == "vd_first") return ConditionOrder::VdFirst;
  if (text == "hd_first") return ConditionOrder::HdFirst;
  throw std::invalid_argument("unknown condition order '" + std::string(text) + "'");
}

PoseLibrary::PoseLibrary() {
  auto j = [](double a, double b, double c, double d, double e, double f) {
    return (Joints() << a, b, c, d, e, f).finished();
  };
  set_joints(PoseId::Exult, j(0.5, 2.4, 0.0, 0.35, 0.0, 0.0));
  set_joints(PoseId::Drink, j(0.1, 0.8, 0.0, 2.1, 1.2, 0.0));
  set_joints(PoseId::Phone, j(0.35, 0.6, 0.5, 2.3, 0.5, 0.0));
  set_joints(PoseId::Hat, j(0.6, 1.8, 0.3, 1.9, 0.0, 0.0));
  set_joints(PoseId::Stop, j(0.2, 1.2, 0.0, 1.4, 0.0, 0.3));
  set_joints(PoseId::Base, j(0.1, 0.3, 0.0, 0.9, 0.0, 0.0));
}

PoseTarget PoseLibrary::target(PoseId id, const KinematicParams& kin) const {
  PoseTarget t;
  t.id = id;
  t.q_target = joints(id);
  const GraspablePoints pts = forward_kinematics(t.q_target, kin);
  t.elbow_target = pts.elbow;
  t.wrist_target = pts.wrist;
  return t;
}

void TaskParams::validate() const {
  if (!(match_tol > 0.0)) throw std::invalid_argument("match tolerance must be positive");
  if (!(hold_s >= 0.0) || !(base_hold_s >= 0.0)) throw std::invalid_argument("hold times must be >= 0");
  if (!(trial_timeout_s > hold_s)) throw std::invalid_argument("trial timeout must exceed the hold time");
}

bool check_pose_match(const GraspablePoints& points, const PoseTarget& target, double tol) {
  return (points.elbow - target.elbow_target).norm() <= tol &&
         (points.wrist - target.wrist_target).norm() <= tol;
}

TrialStepResult start_trial(const TrialSpec& spec, double t) {
  TrialStepResult r;
  r.state.spec = spec;
  r.state.phase = TrialPhase::ShowTarget;
  r.state.shown_at = t;
  r.events.push_back(make_event(TaskEventKind::TrialStarted, t, spec));
  return r;
}

TrialStepResult skip_trial(const TrialState& trial, double t) {
  TrialStepResult r{trial, {}};
  if (r.state.phase == TrialPhase::Done) return r;
  r.state.phase = TrialPhase::Done;
  r.state.holding_since.reset();
  r.events.push_back(make_event(TaskEventKind::TrialSkipped, t, r.state.spec));
  return r;
}

TrialStepResult trial_step(const TrialState& trial, const GraspablePoints& points, double t,
                           const PoseTarget& pose, const PoseTarget& base, const TaskParams& params) {
  TrialStepResult r{trial, {}};
  TrialState& s = r.state;
  auto emit = [&](TaskEventKind k) { r.events.push_back(make_event(k, t, s.spec)); };

  if (s.phase == TrialPhase::ShowTarget) s.phase = TrialPhase::Reaching;

  switch (s.phase) {
    case TrialPhase::Reaching:
    case TrialPhase::Holding: {
      const bool matched = check_pose_match(points, pose, params.match_tol);
      if (s.phase == TrialPhase::Reaching && matched) {
        s.phase = TrialPhase::Holding;
        s.holding_since = t;
        emit(TaskEventKind::HoldStarted);
      } else if (s.phase == TrialPhase::Holding && !matched) {
        s.phase = TrialPhase::Reaching;
        s.holding_since.reset();
        emit(TaskEventKind::HoldLost);
      }
      if (s.phase == TrialPhase::Holding && elapsed_at_least(*s.holding_since, t, params.hold_s)) {
        s.phase = TrialPhase::Confirmed;
        s.confirmed_at = t;
        emit(TaskEventKind::PoseConfirmed);
      } else if (elapsed_at_least(s.shown_at, t, params.trial_timeout_s)) {
        s.phase = TrialPhase::ReturnToBase;
        s.holding_since.reset();
        s.timed_out = true;
        s.return_started_at = t;
        emit(TaskEventKind::TrialTimedOut);
      }
      break;
    }
    case TrialPhase::Confirmed:
      s.phase = TrialPhase::ReturnToBase;
      s.return_started_at = t;
      break;
    case TrialPhase::ReturnToBase: {
      const bool matched = check_pose_match(points, base, params.match_tol);
      if (!matched) {
        s.holding_since.reset();
      } else if (!s.holding_since) {
        s.holding_since = t;
      }
      if (s.holding_since && elapsed_at_least(*s.holding_since, t, params.base_hold_s)) {
        s.phase = TrialPhase::Done;
        emit(TaskEventKind::BaseReached);
      } else if (elapsed_at_least(*s.return_started_at, t, params.trial_timeout_s)) {
        s.phase = TrialPhase::Done;
        emit(TaskEventKind::BaseTimedOut);
      }
      break;
    }
    case TrialPhase::ShowTarget:
    case TrialPhase::Done:
      break;
  }
  return r;
}

double hold_remaining(const TrialState& trial, double t, const TaskParams& params) {
  if (trial.phase != TrialPhase::Holding || !trial.holding_since) return 0.0;
  return std::max(0.0, params.hold_s - (t - *trial.holding_since));
}

std::size_t SessionSchedule::analyzed_count() const {
  return static_cast<std::size_t>(
      std::count_if(trials.begin(), trials.end(), [](const TrialSpec& s) { return !s.familiarization; }));
}

std::size_t SessionSchedule::familiarization_count() const { return trials.size() - analyzed_count(); }

SessionSchedule build_session(const ScheduleConfig& config, std::uint64_t seed) {
  if (config.blocks_per_condition < 1 || config.blocks_per_condition > 255) {
    throw std::invalid_argument("blocks_per_condition must lie in [1, 255]");
  }
  if (config.familiarization_trials < 0 ||
      config.familiarization_trials > static_cast<int>(kAdlPoses.size())) {
    throw std::invalid_argument("familiarization_trials must lie in [0, 5]");
  }
  SessionSchedule sched;
  sched.seed = seed;
  sched.order = config.order;

  const std::array<Condition, 2> conditions =
      config.order == ConditionOrder::VdFirst ? std::array{Condition::VD, Condition::HD}
                                              : std::array{Condition::HD, Condition::VD};
  std::uint32_t next_id = 1;
  std::uint64_t stream = 0;
  for (const Condition c : conditions) {
    std::array<PoseId, 5> poses = kAdlPoses;
    Xoshiro256 fam_rng = Xoshiro256::derive(seed, stream++);
    fam_rng.shuffle(std::span<PoseId>(poses));
    for (int i = 0; i < config.familiarization_trials; ++i) {
      sched.trials.push_back({next_id++, c, 0, true, poses[static_cast<std::size_t>(i)]});
    }
    for (int b = 1; b <= config.blocks_per_condition; ++b) {
      std::array<PoseId, 5> block = kAdlPoses;
      Xoshiro256 rng = Xoshiro256::derive(seed, stream++);
      rng.shuffle(std::span<PoseId>(block));
      for (const PoseId p : block) {
        sched.trials.push_back({next_id++, c, static_cast<std::uint8_t>(b), false, p});
      }
    }
  }
  return sched;
}

}  // namespace teleop
