#pragma once

#include "teleop/config.hpp"
#include "teleop/coupling.hpp"
#include "teleop/netproto.hpp"
#include "teleop/operators.hpp"
#include "teleop/task_engine.hpp"
#include "teleop/transport.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace teleop {

// Latest-value slot shared between two threads; a newer put overwrites an
// unread value.
template <typename T>
class Mailbox {
 public:
  void put(T value) {
    std::lock_guard lock(mu_);
    value_ = std::move(value);
    ++version_;
  }
  std::optional<T> take() {
    std::lock_guard lock(mu_);
    std::optional<T> out = std::move(value_);
    value_.reset();
    return out;
  }
  std::optional<T> peek() const {
    std::lock_guard lock(mu_);
    return value_;
  }
  std::uint64_t version() const {
    std::lock_guard lock(mu_);
    return version_;
  }

 private:
  mutable std::mutex mu_;
  std::optional<T> value_;
  std::uint64_t version_ = 0;
};

// Status broadcasts carried in TaskEventMsg next to the discrete task events.
// event = kStatusBase + TrialPhase: pose is the target currently shown,
// value the time it appeared. event = kGrabBase + grab code: grab state.
inline constexpr std::uint8_t kStatusBase = 16;
inline constexpr std::uint8_t kGrabBase = 32;
inline constexpr std::uint8_t kIdleStatus = 31;  // no trial running

std::uint8_t grab_code(const GrabState& g);
GrabState grab_from_code(std::uint8_t code);

// One controller tick as written to the log.
struct LogRow {
  std::uint64_t t_us = 0;
  Joints q = Joints::Zero();
  Vec3 elbow = Vec3::Zero();
  Vec3 wrist = Vec3::Zero();
  Vec3 leader = Vec3::Zero();
  Vec3 mapped = Vec3::Zero();
  GrabState grab;
  Vec3 fs = Vec3::Zero();  // leader frame
  Vec3 fa = Vec3::Zero();
  Joints tau = Joints::Zero();
  std::uint32_t trial_id = 0;
  PoseId pose = PoseId::Base;
  TrialPhase phase = TrialPhase::Done;
  Condition condition = Condition::VD;
  std::uint8_t block = 0;
};

// Everything the UI and the logs need about the current controller state.
struct WorldSnapshot {
  double t = 0.0;
  Joints q = Joints::Zero();
  GraspablePoints points;
  Vec3 leader = Vec3::Zero();
  Vec3 mapped = Vec3::Zero();
  GrabState grab;
  Vec3 fs = Vec3::Zero();
  Vec3 fa = Vec3::Zero();
  bool trial_active = false;
  TrialSpec trial;
  TrialPhase phase = TrialPhase::Done;
  PoseTarget target;  // currently shown (base during the return)
  bool matched = false;
  double hold_remaining = 0.0;
  std::size_t trial_index = 0;  // 1-based, 0 before the first trial
  std::size_t trial_count = 0;
  bool finished = false;
};

class SessionSink {
 public:
  virtual ~SessionSink() = default;
  virtual void on_row(const LogRow& row) = 0;
  virtual void on_event(const TaskEvent& event) = 0;
};

struct TrialOutcome {
  TrialSpec spec;
  double shown_at = 0.0;
  std::optional<double> confirmed_at;
  bool timed_out = false;
  bool skipped = false;
};

struct NodeCounters {
  std::uint64_t malformed = 0;
  std::uint64_t stale = 0;
  std::uint64_t received = 0;
  std::uint64_t sent = 0;
};

class ControllerNode {
 public:
  ControllerNode(const SessionConfig& config, const SessionSchedule& schedule, net::Port& port,
                 SessionSink* sink);

  void tick(std::uint64_t k);
  bool finished() const { return finished_; }
  const WorldSnapshot& snapshot() const { return snapshot_; }
  const std::vector<TrialOutcome>& outcomes() const { return outcomes_; }
  const NodeCounters& counters() const { return counters_; }

  // Ends the running trial unconfirmed; the next one starts on the next tick.
  void skip_current_trial();

 private:
  void receive(double t);
  void start_next_trial(double t);
  void record(const std::vector<TaskEvent>& events);
  void broadcast(const net::Message& m, double t);

  SessionConfig cfg_;
  SessionSchedule schedule_;
  std::size_t trial_limit_;
  net::Port& port_;
  SessionSink* sink_;
  net::SeqTracker seq_;
  std::uint32_t out_seq_ = 0;
  std::optional<net::LeaderStateMsg> leader_;
  std::optional<net::FollowerStateMsg> follower_;
  CouplingState coupling_;
  std::optional<TrialState> trial_;
  std::size_t next_trial_ = 0;
  bool skip_requested_ = false;
  bool finished_ = false;
  PoseTarget base_;
  std::vector<TrialOutcome> outcomes_;
  WorldSnapshot snapshot_;
  NodeCounters counters_;
  double send_period_;
  double next_send_ = 0.0;
};

// Source of operator commands replacing the scripted trainer (UI mode).
using OperatorInput = std::function<std::optional<OperatorCommand>()>;

class LeaderNode {
 public:
  LeaderNode(const SessionConfig& config, net::Port& port, OperatorInput external = {});

  void tick(std::uint64_t k);
  const LeaderState& state() const { return state_; }
  const TrainerState& trainer() const { return trainer_; }
  const NodeCounters& counters() const { return counters_; }

 private:
  SessionConfig cfg_;
  net::Port& port_;
  OperatorInput external_;
  net::SeqTracker seq_;
  std::uint32_t out_seq_ = 0;
  LeaderState state_;
  TrainerState trainer_;
  OperatorCommand command_;
  Vec3 feedback_ = Vec3::Zero();
  std::optional<net::FollowerStateMsg> follower_;
  GrabState grab_;
  TrialPhase phase_ = TrialPhase::Done;
  bool active_ = false;
  Condition condition_ = Condition::VD;
  PoseId pose_ = PoseId::Base;
  NodeCounters counters_;
  double send_period_;
  double next_send_ = 0.0;
};

class FollowerNode {
 public:
  FollowerNode(const SessionConfig& config, std::uint64_t seed, net::Port& port);

  // Throws PlantFault on a non-finite command.
  void tick(std::uint64_t k);
  const FollowerState& state() const { return state_; }
  const NodeCounters& counters() const { return counters_; }

 private:
  SessionConfig cfg_;
  std::uint64_t seed_;
  net::Port& port_;
  net::SeqTracker seq_;
  std::uint32_t out_seq_ = 0;
  FollowerState state_;
  Joints tau_cmd_ = Joints::Zero();
  bool active_ = false;
  TrialPhase phase_ = TrialPhase::Done;
  Condition condition_ = Condition::VD;
  PoseId pose_ = PoseId::Base;
  std::uint32_t trial_id_ = 0;
  double shown_at_ = 0.0;
  Joints imitation_error_ = Joints::Zero();
  NodeCounters counters_;
  double send_period_;
  double next_send_ = 0.0;
};

enum class SessionStatus : std::uint8_t { Completed, Faulted, Stopped };

std::string_view to_string(SessionStatus s);

struct SessionResult {
  SessionStatus status = SessionStatus::Completed;
  std::string fault;
  std::uint64_t seed = 0;
  SessionSchedule schedule;
  std::vector<TrialOutcome> trials;
  std::uint64_t ticks = 0;
  double sim_time = 0.0;
  net::LinkStats link;
  std::uint64_t malformed = 0;
  std::uint64_t stale = 0;
};

struct RunOptions {
  // Called after every controller tick (loopback) with the fresh snapshot.
  std::function<void(const WorldSnapshot&)> on_snapshot;
  OperatorInput operator_input;
  std::atomic<bool>* stop = nullptr;
  // Pace ticks against the wall clock (serve mode).
  bool real_time = false;
  bool start_paused = false;
  // Called before every tick; may pause/resume or skip trials.
  std::function<void(ControllerNode&, bool& paused)> control;
};

std::uint64_t effective_seed(const SessionConfig& config);

// Runs one session over the configured transport. Loopback runs are a pure
// function of (config, seed). UDP runs host all three nodes in this
// process, each on its own thread paced in real time.
SessionResult run_session(const SessionConfig& config, SessionSink* sink, const RunOptions& options = {});

// Runs a single node against UDP peers (one node per process).
SessionResult run_udp_node(const SessionConfig& config, net::NodeId node, SessionSink* sink,
                           std::atomic<bool>* stop = nullptr);

}  // namespace teleop
