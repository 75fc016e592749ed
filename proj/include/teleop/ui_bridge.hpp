#pragma once

#include "teleop/config.hpp"
#include "teleop/session.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace teleop::ui {

inline constexpr int kProtocolVersion = 1;

// Marker colour of a graspable point: green iff the coupling holds it.
std::string_view marker_color(const GrabState& grab, PointId point);

// Versioned JSON state frame ("type": "state").
std::string state_message(const WorldSnapshot& snapshot, std::uint64_t seq, bool paused);

struct SetTarget {
  Vec3 pos = Vec3::Zero();  // leader frame
};
struct SetGrip {
  bool closed = false;
};
enum class ControlAction : std::uint8_t { Start, Pause, NextTrial };
struct SessionControl {
  ControlAction action = ControlAction::Start;
};

using UiCommand = std::variant<SetTarget, SetGrip, SessionControl>;

struct UiError {
  std::string code;  // malformed | bad_version | unknown_kind | invalid_value
  std::string message;
};

std::variant<UiCommand, UiError> parse_command(std::string_view text);
std::string error_message(const UiError& error);

// Token bucket: at most `rate` commands per second, bursts up to `rate`.
class RateLimiter {
 public:
  explicit RateLimiter(double rate) : rate_(rate), tokens_(rate) {}
  bool allow(double now);
  std::uint64_t dropped() const { return dropped_; }

 private:
  double rate_;
  double tokens_;
  std::optional<double> last_;
  std::uint64_t dropped_ = 0;
};

// Thread-safe hand-off between connection handlers and the simulation
// loop: latest state out, latest operator command in (last writer wins),
// session-control actions queued.
class Bridge {
 public:
  explicit Bridge(const UiParams& params);

  // Connection side. Returns an error frame to send back, if any.
  std::optional<std::string> handle_message(std::string_view text, double now);
  // Latest state frame and its sequence number (0 before the first).
  std::pair<std::uint64_t, std::string> latest_state() const;

  // Simulation side.
  OperatorInput operator_input();
  std::vector<ControlAction> take_controls();
  // Publishes a frame when at least 1/rate_hz has passed on the caller's
  // clock since the previous one.
  bool publish(const WorldSnapshot& snapshot, bool paused, double now);
  // Publishes unconditionally (replay streams at its own pace).
  void publish_now(const WorldSnapshot& snapshot, bool paused);

  std::uint64_t dropped_commands() const;

 private:
  UiParams params_;
  mutable std::mutex mu_;
  RateLimiter limiter_;
  std::optional<OperatorCommand> command_;
  std::deque<ControlAction> controls_;
  std::uint64_t state_seq_ = 0;
  std::string state_;
  std::optional<double> last_publish_;
};

// Rebuilds UI snapshots from a recorded bundle for replay.
class ReplaySource {
 public:
  explicit ReplaySource(const std::filesystem::path& bundle_dir);

  // Next snapshot at or after the previous one plus `period` seconds;
  // empty at the end of the log.
  std::optional<WorldSnapshot> next(double period);

 private:
  SessionConfig cfg_;
  std::ifstream in_;
  std::size_t row_ = 1;
  std::optional<double> last_t_;
  std::optional<double> holding_since_;
  std::uint32_t trial_ = 0;
  std::size_t trial_index_ = 0;
};

}  // namespace teleop::ui
