#include "teleop/session.hpp"

#include "teleop/rng.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <thread>

namespace teleop {
namespace {

using net::NodeId;

constexpr std::uint8_t kSessionEnd = 30;

std::uint64_t dt_us(const SessionConfig& c) { return static_cast<std::uint64_t>(std::llround(c.plant.dt * 1e6)); }

double tick_time(std::uint64_t k, const SessionConfig& c) { return static_cast<double>(k * dt_us(c)) * 1e-6; }

double send_period(const SessionConfig& c) {
  return c.transport == TransportKind::Loopback ? 0.0 : 1.0 / c.udp.send_rate_hz;
}

// Rate gate for outgoing state streams; a zero period sends every tick.
bool due(double t, double period, double& next) {
  if (period <= 0.0) return true;
  if (t + 1e-9 < next) return false;
  next = std::max(next + period, t);
  return true;
}

template <typename Handler>
void drain(net::Port& port, double t, net::SeqTracker& seq, NodeCounters& counters, Handler&& handle) {
  for (const auto& d : port.receive(t)) {
    const auto r = net::decode(d.bytes);
    if (!r) {
      ++counters.malformed;
      continue;
    }
    if (seq.accept(static_cast<std::uint32_t>(d.from), r.message()) == net::Verdict::RejectStale) {
      ++counters.stale;
      continue;
    }
    ++counters.received;
    handle(d.from, r.message());
  }
}

void send_to(net::Port& port, NodeId to, const net::Message& m, double t, NodeCounters& counters) {
  const net::Bytes bytes = net::encode(m);
  port.send(to, bytes, t);
  ++counters.sent;
}

bool is_status(std::uint8_t ev) { return ev >= kStatusBase && ev <= kStatusBase + 5; }

}  // namespace

std::uint8_t grab_code(const GrabState& g) {
  switch (g.phase) {
    case GrabPhase::Free:
      return 0;
    case GrabPhase::Near:
      return g.point == PointId::Elbow ? 1 : 2;
    case GrabPhase::Engaged:
      return g.point == PointId::Elbow ? 3 : 4;
  }
  return 0;
}

GrabState grab_from_code(std::uint8_t code) {
  switch (code) {
    case 1:
      return {GrabPhase::Near, PointId::Elbow};
    case 2:
      return {GrabPhase::Near, PointId::Wrist};
    case 3:
      return {GrabPhase::Engaged, PointId::Elbow};
    case 4:
      return {GrabPhase::Engaged, PointId::Wrist};
    default:
      return {};
  }
}

std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::Completed:
      return "completed";
    case SessionStatus::Faulted:
      return "faulted";
    case SessionStatus::Stopped:
      return "stopped";
  }
  return "?";
}

std::uint64_t effective_seed(const SessionConfig& config) {
  if (config.seed) return *config.seed;
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

// ---------------------------------------------------------------- controller

ControllerNode::ControllerNode(const SessionConfig& config, const SessionSchedule& schedule,
                               net::Port& port, SessionSink* sink)
    : cfg_(config),
      schedule_(schedule),
      trial_limit_(config.max_trials > 0
                       ? std::min<std::size_t>(schedule.trials.size(), static_cast<std::size_t>(config.max_trials))
                       : schedule.trials.size()),
      port_(port),
      sink_(sink),
      base_(config.poses.target(PoseId::Base, config.kinematics)),
      send_period_(send_period(config)) {
  snapshot_.trial_count = trial_limit_;
  snapshot_.target = base_;
}

void ControllerNode::skip_current_trial() { skip_requested_ = true; }

void ControllerNode::record(const std::vector<TaskEvent>& events) {
  for (const auto& e : events) {
    if (sink_ != nullptr) sink_->on_event(e);
    if (outcomes_.empty() || outcomes_.back().spec.trial_id != e.trial.trial_id) continue;
    auto& o = outcomes_.back();
    if (e.kind == TaskEventKind::PoseConfirmed) o.confirmed_at = e.t;
    if (e.kind == TaskEventKind::TrialTimedOut) o.timed_out = true;
    if (e.kind == TaskEventKind::TrialSkipped) o.skipped = true;
  }
  for (const auto& e : events) {
    net::TaskEventMsg m;
    m.seq = ++out_seq_;
    m.t_us = static_cast<std::uint64_t>(std::llround(e.t * 1e6));
    m.event = static_cast<std::uint8_t>(e.kind);
    m.pose = static_cast<std::uint8_t>(e.trial.pose);
    m.condition = static_cast<std::uint8_t>(e.trial.condition);
    m.block = e.trial.block;
    m.trial_id = e.trial.trial_id;
    m.value = e.t;
    broadcast(m, e.t);
  }
}

void ControllerNode::broadcast(const net::Message& m, double t) {
  send_to(port_, NodeId::Leader, m, t, counters_);
  send_to(port_, NodeId::Follower, m, t, counters_);
}

void ControllerNode::start_next_trial(double t) {
  if (next_trial_ >= trial_limit_) {
    trial_.reset();
    finished_ = true;
    return;
  }
  const TrialSpec& spec = schedule_.trials[next_trial_++];
  auto r = start_trial(spec, t);
  trial_ = r.state;
  coupling_ = CouplingState{};
  outcomes_.push_back({spec, t, std::nullopt, false, false});
  record(r.events);
}

void ControllerNode::receive(double t) {
  drain(port_, t, seq_, counters_, [&](NodeId, const net::Message& m) {
    if (const auto* l = std::get_if<net::LeaderStateMsg>(&m)) leader_ = *l;
    if (const auto* f = std::get_if<net::FollowerStateMsg>(&m)) follower_ = *f;
  });
}

void ControllerNode::tick(std::uint64_t k) {
  const double t = tick_time(k, cfg_);
  const std::uint64_t t_us = k * dt_us(cfg_);
  receive(t);

  if (finished_) {
    net::TaskEventMsg end;
    end.seq = ++out_seq_;
    end.t_us = t_us;
    end.event = kSessionEnd;
    broadcast(end, t);
    return;
  }
  if (!leader_ || !follower_) return;

  if (!trial_) {
    start_next_trial(t);
    if (finished_) return;
  } else if (skip_requested_) {
    auto r = skip_trial(*trial_, t);
    trial_ = r.state;
    record(r.events);
  }
  skip_requested_ = false;

  const TrialSpec spec = trial_->spec;
  const PoseTarget pose = cfg_.poses.target(spec.pose, cfg_.kinematics);
  const bool coupled = spec.condition == Condition::HD && trial_->phase != TrialPhase::Done;

  ControllerInput in;
  in.leader_pos = leader_->pos;
  in.leader_vel = leader_->vel;
  in.grip_closed = leader_->grip_closed;
  in.q = follower_->q;
  in.qdot = follower_->qdot;
  const ControllerOutput out = controller_step(coupling_, in, cfg_.frame, cfg_.coupling, cfg_.kinematics, coupled);
  coupling_ = out.state;

  if (trial_->phase != TrialPhase::Done) {
    auto r = trial_step(*trial_, out.points, t, pose, base_, cfg_.task);
    trial_ = r.state;
    record(r.events);
  }

  const TrialState& ts = *trial_;
  const bool returning = ts.returning() || ts.phase == TrialPhase::Done;
  const PoseTarget& shown = returning ? base_ : pose;

  if (sink_ != nullptr) {
    LogRow row;
    row.t_us = t_us;
    row.q = follower_->q;
    row.elbow = out.points.elbow;
    row.wrist = out.points.wrist;
    row.leader = leader_->pos;
    row.mapped = out.mapped_pos;
    row.grab = coupling_.grab;
    row.fs = out.leader_force;
    row.fa = out.follower_force;
    row.tau = out.tau;
    row.trial_id = spec.trial_id;
    row.pose = spec.pose;
    row.phase = ts.phase;
    row.condition = spec.condition;
    row.block = spec.block;
    sink_->on_row(row);
  }

  WorldSnapshot& s = snapshot_;
  s.t = t;
  s.q = follower_->q;
  s.points = out.points;
  s.leader = leader_->pos;
  s.mapped = out.mapped_pos;
  s.grab = coupling_.grab;
  s.fs = out.leader_force;
  s.fa = out.follower_force;
  s.trial_active = ts.phase != TrialPhase::Done;
  s.trial = spec;
  s.phase = ts.phase;
  s.target = shown;
  s.matched = check_pose_match(out.points, shown, cfg_.task.match_tol);
  s.hold_remaining = hold_remaining(ts, t, cfg_.task);
  s.trial_index = next_trial_;

  if (due(t, send_period_, next_send_)) {
    net::ForceCmdMsg f;
    f.seq = ++out_seq_;
    f.t_us = t_us;
    f.force = out.leader_force;
    send_to(port_, NodeId::Leader, f, t, counters_);

    net::TorqueCmdMsg tq;
    tq.seq = ++out_seq_;
    tq.t_us = t_us;
    tq.tau = out.tau;
    send_to(port_, NodeId::Follower, tq, t, counters_);

    net::TaskEventMsg status;
    status.seq = ++out_seq_;
    status.t_us = t_us;
    status.event = static_cast<std::uint8_t>(kStatusBase + static_cast<std::uint8_t>(ts.phase));
    status.pose = static_cast<std::uint8_t>(shown.id);
    status.condition = static_cast<std::uint8_t>(spec.condition);
    status.block = spec.block;
    status.trial_id = spec.trial_id;
    status.value = returning && ts.return_started_at ? *ts.return_started_at : ts.shown_at;
    broadcast(status, t);

    net::TaskEventMsg grab = status;
    grab.seq = ++out_seq_;
    grab.event = static_cast<std::uint8_t>(kGrabBase + grab_code(coupling_.grab));
    grab.value = 0.0;
    send_to(port_, NodeId::Leader, grab, t, counters_);
  }

  if (ts.phase == TrialPhase::Done) {
    start_next_trial(t);
    s.trial_index = next_trial_;
    s.finished = finished_;
  }
}

// -------------------------------------------------------------------- leader

LeaderNode::LeaderNode(const SessionConfig& config, net::Port& port, OperatorInput external)
    : cfg_(config), port_(port), external_(std::move(external)), send_period_(send_period(config)) {}

void LeaderNode::tick(std::uint64_t k) {
  const double t = tick_time(k, cfg_);
  drain(port_, t, seq_, counters_, [&](NodeId, const net::Message& m) {
    if (const auto* f = std::get_if<net::ForceCmdMsg>(&m)) feedback_ = f->force;
    if (const auto* f = std::get_if<net::FollowerStateMsg>(&m)) follower_ = *f;
    if (const auto* e = std::get_if<net::TaskEventMsg>(&m)) {
      if (is_status(e->event)) {
        phase_ = static_cast<TrialPhase>(e->event - kStatusBase);
        active_ = phase_ != TrialPhase::Done;
        condition_ = static_cast<Condition>(e->condition);
        pose_ = static_cast<PoseId>(e->pose);
      } else if (e->event >= kGrabBase && e->event <= kGrabBase + 4) {
        grab_ = grab_from_code(static_cast<std::uint8_t>(e->event - kGrabBase));
      } else if (e->event == kSessionEnd || e->event == kIdleStatus) {
        active_ = false;
        phase_ = TrialPhase::Done;
      }
    }
  });

  if (external_) {
    if (auto c = external_()) command_ = *c;
  } else {
    WorldView view;
    view.grab = grab_;
    view.leader_pos = state_.pos;
    view.phase = active_ && condition_ == Condition::HD && follower_ ? phase_ : TrialPhase::Done;
    if (follower_) view.points = {follower_->elbow, follower_->wrist};
    view.target = cfg_.poses.target(pose_, cfg_.kinematics);
    if (trainer_.phase == TrainerPhase::Idle) trainer_.command = state_.pos;
    const TrainerStep step = trainer_policy_step(trainer_, view, t, cfg_.trainer, cfg_.frame);
    trainer_ = step.state;
    command_ = step.command;
  }

  state_ = device_step(state_, command_.target, command_.grip, feedback_, cfg_.plant.dt, cfg_.device);

  if (due(t, send_period_, next_send_)) {
    net::LeaderStateMsg m;
    m.seq = ++out_seq_;
    m.t_us = k * dt_us(cfg_);
    m.pos = state_.pos;
    m.vel = state_.vel;
    m.grip_closed = state_.grip_closed;
    send_to(port_, NodeId::Controller, m, t, counters_);
  }
}

// ------------------------------------------------------------------ follower

FollowerNode::FollowerNode(const SessionConfig& config, std::uint64_t seed, net::Port& port)
    : cfg_(config), seed_(seed), port_(port), send_period_(send_period(config)) {
  state_.q = config.poses.joints(PoseId::Base);
}

void FollowerNode::tick(std::uint64_t k) {
  const double t = tick_time(k, cfg_);
  drain(port_, t, seq_, counters_, [&](NodeId, const net::Message& m) {
    if (const auto* c = std::get_if<net::TorqueCmdMsg>(&m)) tau_cmd_ = c->tau;
    if (const auto* e = std::get_if<net::TaskEventMsg>(&m)) {
      if (is_status(e->event)) {
        const auto pose = static_cast<PoseId>(e->pose);
        if (e->trial_id != trial_id_ || pose != pose_ || e->value != shown_at_) {
          // New target: draw this leg's imitation error.
          const bool returning = pose == PoseId::Base;
          Xoshiro256 rng = Xoshiro256::derive(seed_, 0x10000ULL + 2ULL * e->trial_id + (returning ? 1 : 0));
          for (int i = 0; i < kNumJoints; ++i) imitation_error_[i] = cfg_.trainee.imitation_noise * rng.normal();
        }
        phase_ = static_cast<TrialPhase>(e->event - kStatusBase);
        active_ = phase_ != TrialPhase::Done;
        condition_ = static_cast<Condition>(e->condition);
        pose_ = pose;
        trial_id_ = e->trial_id;
        shown_at_ = e->value;
      } else if (e->event == kSessionEnd || e->event == kIdleStatus) {
        active_ = false;
      }
    }
  });

  Joints tau_vol = trainee_support_torques(state_.q, cfg_.trainee, cfg_.plant, cfg_.kinematics);
  if (active_ && condition_ == Condition::VD) {
    const PoseTarget target = cfg_.poses.target(pose_, cfg_.kinematics);
    const Joints limited = cfg_.kinematics.limits.clamp(target.q_target + imitation_error_) - target.q_target;
    tau_vol += vd_trainee_policy(state_.q, state_.qdot, target, t - shown_at_, cfg_.trainee, limited);
  }
  state_ = plant_step(state_, tau_cmd_, tau_vol, cfg_.plant, cfg_.kinematics);

  if (due(t, send_period_, next_send_)) {
    const GraspablePoints p = forward_kinematics(state_.q, cfg_.kinematics);
    net::FollowerStateMsg m;
    m.seq = ++out_seq_;
    m.t_us = k * dt_us(cfg_);
    m.q = state_.q;
    m.qdot = state_.qdot;
    m.elbow = p.elbow;
    m.wrist = p.wrist;
    send_to(port_, NodeId::Controller, m, t, counters_);
    m.seq = ++out_seq_;
    send_to(port_, NodeId::Leader, m, t, counters_);
  }
}

// -------------------------------------------------------------------- runner

namespace {

void finish_result(SessionResult& r, const ControllerNode& c, const std::vector<const NodeCounters*>& nodes) {
  r.trials = c.outcomes();
  for (const auto* n : nodes) {
    r.malformed += n->malformed;
    r.stale += n->stale;
  }
}

SessionResult run_loopback(const SessionConfig& cfg, SessionSink* sink, const RunOptions& opt) {
  SessionResult r;
  r.seed = effective_seed(cfg);
  r.schedule = build_session(cfg.schedule, r.seed);

  net::LoopbackNetwork network(cfg.link);
  ControllerNode controller(cfg, r.schedule, network.port(NodeId::Controller), sink);
  LeaderNode leader(cfg, network.port(NodeId::Leader), opt.operator_input);
  FollowerNode follower(cfg, r.seed, network.port(NodeId::Follower));

  const auto step = std::chrono::microseconds(dt_us(cfg));
  auto wall = std::chrono::steady_clock::now();
  bool paused = opt.start_paused;
  std::uint64_t k = 0;
  bool started = false;
  try {
    while (!controller.finished()) {
      if (opt.stop != nullptr && opt.stop->load()) {
        r.status = SessionStatus::Stopped;
        break;
      }
      if (opt.control) opt.control(controller, paused);
      if (paused) {
        if (opt.on_snapshot) opt.on_snapshot(controller.snapshot());
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
        wall = std::chrono::steady_clock::now();
        continue;
      }
      if (opt.real_time) {
        wall += step;
        std::this_thread::sleep_until(wall);
      }
      controller.tick(k);
      if (opt.on_snapshot) opt.on_snapshot(controller.snapshot());
      leader.tick(k);
      follower.tick(k);
      started = started || controller.snapshot().trial_index > 0;
      if (!started && tick_time(k, cfg) > cfg.udp.handshake_timeout_s) {
        throw net::TransportError("no state received from the leader and follower nodes");
      }
      ++k;
    }
  } catch (const PlantFault& e) {
    r.status = SessionStatus::Faulted;
    r.fault = e.what();
  }
  r.ticks = k;
  r.sim_time = tick_time(k, cfg);
  r.link = network.total_stats();
  finish_result(r, controller, {&controller.counters(), &leader.counters(), &follower.counters()});
  return r;
}

std::array<net::Endpoint, net::kNumNodes> endpoints(const SessionConfig& cfg) {
  return {cfg.udp.leader, cfg.udp.controller, cfg.udp.follower};
}

// Peers a node must hear from before the session can start.
std::vector<NodeId> required_peers(NodeId node) {
  switch (node) {
    case NodeId::Leader:
      return {NodeId::Controller, NodeId::Follower};
    case NodeId::Controller:
      return {NodeId::Leader, NodeId::Follower};
    case NodeId::Follower:
      return {NodeId::Controller};
  }
  return {};
}

// Port wrapper that remembers which peers have been heard from and when.
class WatchedPort final : public net::Port {
 public:
  explicit WatchedPort(net::Port& inner) : inner_(inner) {}
  void send(NodeId to, std::span<const std::uint8_t> bytes, double now) override { inner_.send(to, bytes, now); }
  std::vector<net::Datagram> receive(double now) override {
    auto ds = inner_.receive(now);
    for (const auto& d : ds) {
      last_heard_[static_cast<std::size_t>(d.from)] = now;
      if (const auto r = net::decode(d.bytes); r.ok()) {
        if (const auto* e = std::get_if<net::TaskEventMsg>(&r.message()); e && e->event == kSessionEnd) ended_ = true;
      }
    }
    return ds;
  }
  std::optional<double> last_heard(NodeId n) const { return last_heard_[static_cast<std::size_t>(n)]; }
  bool ended() const { return ended_; }

 private:
  net::Port& inner_;
  std::array<std::optional<double>, net::kNumNodes> last_heard_{};
  bool ended_ = false;
};

}  // namespace

SessionResult run_udp_node(const SessionConfig& cfg, NodeId node, SessionSink* sink, std::atomic<bool>* stop) {
  SessionResult r;
  r.seed = effective_seed(cfg);
  r.schedule = build_session(cfg.schedule, r.seed);
  const auto eps = endpoints(cfg);
  net::UdpPort udp(node, eps[static_cast<std::size_t>(node)], eps, cfg.udp.queue_capacity);
  WatchedPort port(udp);

  std::optional<ControllerNode> controller;
  std::optional<LeaderNode> leader;
  std::optional<FollowerNode> follower;
  if (node == NodeId::Controller) controller.emplace(cfg, r.schedule, port, sink);
  if (node == NodeId::Leader) leader.emplace(cfg, port);
  if (node == NodeId::Follower) follower.emplace(cfg, r.seed, port);

  const auto step = std::chrono::microseconds(dt_us(cfg));
  const auto start = std::chrono::steady_clock::now();
  auto wall = start;
  std::uint64_t k = 0;
  std::uint64_t end_ticks = 0;
  const double silence_limit = 2.0 * cfg.udp.handshake_timeout_s;
  try {
    for (;; ++k) {
      if (stop != nullptr && stop->load()) {
        r.status = SessionStatus::Stopped;
        break;
      }
      wall += step;
      std::this_thread::sleep_until(wall);
      const double t = tick_time(k, cfg);
      if (controller) controller->tick(k);
      if (leader) leader->tick(k);
      if (follower) follower->tick(k);

      for (NodeId peer : required_peers(node)) {
        const auto heard = port.last_heard(peer);
        if (!heard && t > cfg.udp.handshake_timeout_s) {
          const auto& ep = eps[static_cast<std::size_t>(peer)];
          throw net::TransportError("peer '" + std::string(net::to_string(peer)) + "' at " + ep.host + ":" +
                                    std::to_string(ep.port) + " is unreachable");
        }
        if (heard && t - *heard > silence_limit && !(controller && controller->finished())) {
          throw net::TransportError("lost contact with peer '" + std::string(net::to_string(peer)) + "'");
        }
      }
      if (controller && controller->finished()) {
        // Keep announcing the end for a moment so both peers see it.
        if (++end_ticks * cfg.plant.dt > 0.1) break;
      }
      if (!controller && port.ended()) break;
    }
  } catch (const PlantFault& e) {
    r.status = SessionStatus::Faulted;
    r.fault = e.what();
  }
  r.ticks = k;
  r.sim_time = tick_time(k, cfg);
  if (controller) {
    finish_result(r, *controller, {&controller->counters()});
  } else if (leader) {
    r.malformed = leader->counters().malformed;
    r.stale = leader->counters().stale;
  } else {
    r.malformed = follower->counters().malformed;
    r.stale = follower->counters().stale;
  }
  return r;
}

SessionResult run_session(const SessionConfig& config, SessionSink* sink, const RunOptions& options) {
  config.validate();
  if (config.transport == TransportKind::Loopback) return run_loopback(config, sink, options);

  SessionConfig cfg = config;
  cfg.seed = effective_seed(config);
  std::atomic<bool> stop{false};
  std::jthread relay([&](std::stop_token st) {
    while (!st.stop_requested() && !stop.load()) {
      if (options.stop != nullptr && options.stop->load()) stop = true;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  });
  SessionResult leader_r;
  SessionResult follower_r;
  std::exception_ptr leader_err;
  std::exception_ptr follower_err;
  std::jthread leader_thread([&] {
    try {
      leader_r = run_udp_node(cfg, NodeId::Leader, nullptr, &stop);
    } catch (...) {
      leader_err = std::current_exception();
      stop = true;
    }
  });
  std::jthread follower_thread([&] {
    try {
      follower_r = run_udp_node(cfg, NodeId::Follower, nullptr, &stop);
      if (follower_r.status == SessionStatus::Faulted) stop = true;
    } catch (...) {
      follower_err = std::current_exception();
      stop = true;
    }
  });
  SessionResult r;
  std::exception_ptr controller_err;
  try {
    r = run_udp_node(cfg, NodeId::Controller, sink, &stop);
  } catch (...) {
    controller_err = std::current_exception();
  }
  stop = true;
  leader_thread.join();
  follower_thread.join();
  relay.request_stop();
  if (follower_r.status == SessionStatus::Faulted) {
    r.status = SessionStatus::Faulted;
    r.fault = follower_r.fault;
    return r;
  }
  if (controller_err) std::rethrow_exception(controller_err);
  if (leader_err) std::rethrow_exception(leader_err);
  if (follower_err) std::rethrow_exception(follower_err);
  r.malformed += leader_r.malformed + follower_r.malformed;
  r.stale += leader_r.stale + follower_r.stale;
  return r;
}

}  // namespace teleop
