#include "teleop/ui_bridge.hpp"

#include "teleop/bundle.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <sstream>

namespace teleop::ui {
namespace {

using json = nlohmann::ordered_json;

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json joints(const Joints& q) {
  json a = json::array();
  for (int i = 0; i < kNumJoints; ++i) a.push_back(q[i]);
  return a;
}

std::string_view action_name(ControlAction a) {
  switch (a) {
    case ControlAction::Start:
      return "start";
    case ControlAction::Pause:
      return "pause";
    case ControlAction::NextTrial:
      return "next_trial";
  }
  return "?";
}

}  // namespace

std::string_view marker_color(const GrabState& grab, PointId point) {
  return grab.engaged_at(point) ? "green" : "red";
}

std::string state_message(const WorldSnapshot& s, std::uint64_t seq, bool paused) {
  json j;
  j["v"] = kProtocolVersion;
  j["type"] = "state";
  j["seq"] = seq;
  j["t"] = s.t;
  j["q"] = joints(s.q);
  j["elbow"] = vec(s.points.elbow);
  j["wrist"] = vec(s.points.wrist);
  j["leader"] = vec(s.leader);
  j["leader_mapped"] = vec(s.mapped);
  json grab;
  grab["state"] = s.grab.phase == GrabPhase::Free ? "free" : (s.grab.phase == GrabPhase::Near ? "near" : "engaged");
  grab["point"] = s.grab.phase == GrabPhase::Free ? json(nullptr) : json(std::string(to_string(s.grab.point)));
  j["grab"] = grab;
  j["marker_colors"] = {{"elbow", std::string(marker_color(s.grab, PointId::Elbow))},
                        {"wrist", std::string(marker_color(s.grab, PointId::Wrist))}};
  j["target"] = {{"pose", std::string(to_string(s.target.id))},
                 {"elbow", vec(s.target.elbow_target)},
                 {"wrist", vec(s.target.wrist_target)},
                 {"q", joints(s.target.q_target)},
                 {"matched", s.matched},
                 {"hold_remaining", s.hold_remaining}};
  j["forces"] = {{"Fs", vec(s.fs)}, {"Fa", vec(s.fa)}};
  j["trial"] = {{"active", s.trial_active},
                {"id", s.trial.trial_id},
                {"index", s.trial_index},
                {"count", s.trial_count},
                {"block", s.trial.block},
                {"condition", std::string(to_string(s.trial.condition))},
                {"familiarization", s.trial.familiarization},
                {"pose", std::string(to_string(s.trial.pose))},
                {"phase", std::string(to_string(s.phase))}};
  j["session"] = {{"paused", paused}, {"finished", s.finished}};
  return j.dump();
}

std::variant<UiCommand, UiError> parse_command(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    return UiError{"malformed", std::string("invalid JSON: ") + e.what()};
  }
  if (!j.is_object()) return UiError{"malformed", "command must be a JSON object"};
  if (!j.contains("v") || !j["v"].is_number_integer()) return UiError{"malformed", "missing integer field 'v'"};
  if (j["v"].get<int>() != kProtocolVersion) {
    return UiError{"bad_version", "unsupported protocol version " + j["v"].dump()};
  }
  if (!j.contains("type") || !j["type"].is_string()) return UiError{"malformed", "missing string field 'type'"};
  const std::string type = j["type"].get<std::string>();

  if (type == "set_target") {
    const auto& p = j.contains("pos") ? j["pos"] : json();
    if (!p.is_array() || p.size() != 3) return UiError{"invalid_value", "'pos' must be an array of 3 numbers"};
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
      if (!p[static_cast<std::size_t>(i)].is_number()) return UiError{"invalid_value", "'pos' must hold numbers"};
      v[i] = p[static_cast<std::size_t>(i)].get<double>();
    }
    if (!v.allFinite()) return UiError{"invalid_value", "'pos' must be finite"};
    return UiCommand{SetTarget{v}};
  }
  if (type == "set_grip") {
    if (!j.contains("closed") || !j["closed"].is_boolean()) {
      return UiError{"invalid_value", "'closed' must be true or false"};
    }
    return UiCommand{SetGrip{j["closed"].get<bool>()}};
  }
  if (type == "session_control") {
    if (!j.contains("action") || !j["action"].is_string()) return UiError{"invalid_value", "missing 'action'"};
    const std::string a = j["action"].get<std::string>();
    for (auto act : {ControlAction::Start, ControlAction::Pause, ControlAction::NextTrial}) {
      if (a == action_name(act)) return UiCommand{SessionControl{act}};
    }
    return UiError{"invalid_value", "unknown action '" + a + "'"};
  }
  return UiError{"unknown_kind", "unknown command type '" + type + "'"};
}

std::string error_message(const UiError& error) {
  json j;
  j["v"] = kProtocolVersion;
  j["type"] = "error";
  j["code"] = error.code;
  j["message"] = error.message;
  return j.dump();
}

bool RateLimiter::allow(double now) {
  if (last_) tokens_ = std::min(rate_, tokens_ + (now - *last_) * rate_);
  last_ = now;
  if (tokens_ >= 1.0) {
    tokens_ -= 1.0;
    return true;
  }
  ++dropped_;
  return false;
}

Bridge::Bridge(const UiParams& params) : params_(params), limiter_(params.command_rate_limit) {}

std::optional<std::string> Bridge::handle_message(std::string_view text, double now) {
  const auto parsed = parse_command(text);
  if (const auto* err = std::get_if<UiError>(&parsed)) return error_message(*err);
  const auto& cmd = std::get<UiCommand>(parsed);
  std::lock_guard lock(mu_);
  if (!limiter_.allow(now)) return std::nullopt;
  if (const auto* t = std::get_if<SetTarget>(&cmd)) {
    OperatorCommand c = command_.value_or(OperatorCommand{});
    c.target = t->pos;
    command_ = c;
  } else if (const auto* g = std::get_if<SetGrip>(&cmd)) {
    OperatorCommand c = command_.value_or(OperatorCommand{});
    c.grip = g->closed;
    command_ = c;
  } else {
    controls_.push_back(std::get<SessionControl>(cmd).action);
  }
  return std::nullopt;
}

std::pair<std::uint64_t, std::string> Bridge::latest_state() const {
  std::lock_guard lock(mu_);
  return {state_seq_, state_};
}

OperatorInput Bridge::operator_input() {
  return [this]() -> std::optional<OperatorCommand> {
    std::lock_guard lock(mu_);
    return command_;
  };
}

std::vector<ControlAction> Bridge::take_controls() {
  std::lock_guard lock(mu_);
  std::vector<ControlAction> out(controls_.begin(), controls_.end());
  controls_.clear();
  return out;
}

bool Bridge::publish(const WorldSnapshot& snapshot, bool paused, double now) {
  {
    std::lock_guard lock(mu_);
    if (last_publish_ && now - *last_publish_ < 1.0 / params_.rate_hz) return false;
    last_publish_ = now;
  }
  publish_now(snapshot, paused);
  return true;
}

void Bridge::publish_now(const WorldSnapshot& snapshot, bool paused) {
  std::lock_guard lock(mu_);
  ++state_seq_;
  state_ = state_message(snapshot, state_seq_, paused);
}

std::uint64_t Bridge::dropped_commands() const {
  std::lock_guard lock(mu_);
  return limiter_.dropped();
}

ReplaySource::ReplaySource(const std::filesystem::path& dir) : in_(dir / kLogFile) {
  if (!in_) throw std::runtime_error("cannot open '" + (dir / kLogFile).string() + "'");
  if (std::filesystem::exists(dir / kConfigFile)) cfg_ = load_config(dir / kConfigFile);
  std::string header;
  std::getline(in_, header);
  if (header + "\n" != log_header()) throw std::runtime_error("unexpected log header in replay input");
}

std::optional<WorldSnapshot> ReplaySource::next(double period) {
  std::string line;
  while (std::getline(in_, line)) {
    ++row_;
    if (line.empty()) continue;
    if (line.rfind(kTruncationMarker, 0) == 0) return std::nullopt;
    LogRow r;
    try {
      r = parse_log_row(line);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("log row " + std::to_string(row_) + ": " + e.what());
    }
    const double t = static_cast<double>(r.t_us) * 1e-6;
    if (r.trial_id != trial_) {
      trial_ = r.trial_id;
      ++trial_index_;
      holding_since_.reset();
    }
    if (r.phase == TrialPhase::Holding) {
      if (!holding_since_) holding_since_ = t;
    } else {
      holding_since_.reset();
    }
    if (last_t_ && t - *last_t_ < period - 1e-9) continue;
    last_t_ = t;

    WorldSnapshot s;
    s.t = t;
    s.q = r.q;
    s.points = {r.elbow, r.wrist};
    s.leader = r.leader;
    s.mapped = r.mapped;
    s.grab = r.grab;
    s.fs = r.fs;
    s.fa = r.fa;
    s.trial_active = r.phase != TrialPhase::Done;
    s.trial.trial_id = r.trial_id;
    s.trial.pose = r.pose;
    s.trial.condition = r.condition;
    s.trial.block = r.block;
    s.trial.familiarization = r.block == 0;
    s.phase = r.phase;
    const bool returning = r.phase == TrialPhase::ReturnToBase || r.phase == TrialPhase::Done;
    s.target = cfg_.poses.target(returning ? PoseId::Base : r.pose, cfg_.kinematics);
    s.matched = check_pose_match(s.points, s.target, cfg_.task.match_tol);
    s.hold_remaining = holding_since_ ? std::max(0.0, cfg_.task.hold_s - (t - *holding_since_)) : 0.0;
    s.trial_index = trial_index_;
    return s;
  }
  return std::nullopt;
}

}  // namespace teleop::ui
