#pragma once

#include "teleop/kinematics.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace teleop {

enum class PoseId : std::uint8_t { Exult = 0, Drink = 1, Phone = 2, Hat = 3, Stop = 4, Base = 5 };

inline constexpr std::array<PoseId, 5> kAdlPoses = {PoseId::Exult, PoseId::Drink, PoseId::Phone,
                                                     PoseId::Hat, PoseId::Stop};

std::string_view to_string(PoseId p);
PoseId parse_pose(std::string_view text);

// VD: visual demonstration (no coupling). HD: haptic demonstration.
enum class Condition : std::uint8_t { VD = 0, HD = 1 };

std::string_view to_string(Condition c);
Condition parse_condition(std::string_view text);

struct PoseTarget {
  PoseId id = PoseId::Base;
  Joints q_target = Joints::Zero();
  Vec3 elbow_target = Vec3::Zero();
  Vec3 wrist_target = Vec3::Zero();

  const Vec3& target_for(PointId p) const { return p == PointId::Elbow ? elbow_target : wrist_target; }
};

// Joint-space definition of the five ADL poses plus the base pose. The
// Cartesian targets are always derived through forward kinematics.
class PoseLibrary {
 public:
  PoseLibrary();

  const Joints& joints(PoseId id) const { return q_[static_cast<std::size_t>(id)]; }
  void set_joints(PoseId id, const Joints& q) { q_[static_cast<std::size_t>(id)] = q; }

  PoseTarget target(PoseId id, const KinematicParams& kin) const;

 private:
  std::array<Joints, 6> q_;
};

struct TaskParams {
  double match_tol = 0.07;        // m, both points
  double hold_s = 3.0;            // continuous match needed to confirm
  double base_hold_s = 0.0;       // hold needed on the return to base
  double trial_timeout_s = 120.0; // per leg (pose, and return to base)

  void validate() const;
};

bool check_pose_match(const GraspablePoints& points, const PoseTarget& target, double tol = 0.07);

enum class TrialPhase : std::uint8_t {
  ShowTarget = 0,
  Reaching = 1,
  Holding = 2,
  Confirmed = 3,
  ReturnToBase = 4,
  Done = 5,
};

std::string_view to_string(TrialPhase p);
TrialPhase parse_phase(std::string_view text);

enum class TaskEventKind : std::uint8_t {
  TrialStarted = 1,
  HoldStarted = 2,
  HoldLost = 3,
  PoseConfirmed = 4,
  BaseReached = 5,
  TrialTimedOut = 6,
  BaseTimedOut = 7,
  TrialSkipped = 8,  // operator moved on to the next trial
};

std::string_view to_string(TaskEventKind k);
TaskEventKind parse_event_kind(std::string_view text);

struct TrialSpec {
  std::uint32_t trial_id = 0;
  Condition condition = Condition::VD;
  std::uint8_t block = 0;  // 0 for familiarization
  bool familiarization = false;
  PoseId pose = PoseId::Exult;
};

struct TaskEvent {
  TaskEventKind kind = TaskEventKind::TrialStarted;
  double t = 0.0;
  TrialSpec trial;
};

struct TrialState {
  TrialSpec spec;
  TrialPhase phase = TrialPhase::ShowTarget;
  double shown_at = 0.0;
  std::optional<double> holding_since;
  std::optional<double> confirmed_at;
  std::optional<double> return_started_at;
  bool timed_out = false;

  // Target the trainee is currently asked to reach.
  bool returning() const { return phase == TrialPhase::ReturnToBase; }
};

struct TrialStepResult {
  TrialState state;
  std::vector<TaskEvent> events;
};

// Fresh trial in ShowTarget at time t plus its TrialStarted event.
TrialStepResult start_trial(const TrialSpec& spec, double t);

// Advance the trial state machine with the current graspable points.
TrialStepResult trial_step(const TrialState& trial, const GraspablePoints& points, double t,
                           const PoseTarget& pose, const PoseTarget& base, const TaskParams& params);

// Ends the trial immediately (Done, unconfirmed) with a TrialSkipped event.
TrialStepResult skip_trial(const TrialState& trial, double t);

// Seconds left on the hold timer during Holding, otherwise 0.
double hold_remaining(const TrialState& trial, double t, const TaskParams& params);

enum class ConditionOrder : std::uint8_t { VdFirst = 0, HdFirst = 1 };

std::string_view to_string(ConditionOrder o);
ConditionOrder parse_condition_order(std::string_view text);

struct ScheduleConfig {
  ConditionOrder order = ConditionOrder::VdFirst;
  int blocks_per_condition = 3;
  int familiarization_trials = 3;
};

struct SessionSchedule {
  std::uint64_t seed = 0;
  ConditionOrder order = ConditionOrder::VdFirst;
  std::vector<TrialSpec> trials;

  std::size_t analyzed_count() const;
  std::size_t familiarization_count() const;
};

// Pure function of (config, seed). Each condition gets its familiarization
// trials (distinct poses, drawn from a seeded permutation) followed by its
// blocks, each block a seeded permutation of the five ADL poses. The PRNG
// is xoshiro256** (see rng.hpp) with one derived stream per block.
SessionSchedule build_session(const ScheduleConfig& config, std::uint64_t seed);

// Per-trial timeline as recorded in the events file.
struct TrialRecord {
  TrialSpec spec;
  double shown_at = 0.0;
  std::optional<double> confirmed_at;
};

}  // namespace teleop
