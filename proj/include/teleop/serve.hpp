#pragma once

#include "teleop/config.hpp"
#include "teleop/session.hpp"

#include <atomic>
#include <filesystem>
#include <optional>

namespace teleop {

struct ServeOptions {
  std::uint16_t ws_port = 8765;
  std::filesystem::path static_dir;  // served at / when set
  std::optional<std::filesystem::path> bundle_dir;  // log the session here when set
  bool exit_when_finished = false;
  std::atomic<bool>* stop = nullptr;
  // Called once the WebSocket server is listening.
  std::function<void(std::uint16_t port)> on_listening;
};

// Real-time loopback session steered through the UI bridge. Starts paused;
// a session_control "start" command begins the first trial.
SessionResult serve_session(const SessionConfig& config, const ServeOptions& options);

struct ReplayOptions {
  std::uint16_t ws_port = 8765;
  double rate_hz = 50.0;
  bool wait_for_client = true;
  std::atomic<bool>* stop = nullptr;
  std::function<void(std::uint16_t port)> on_listening;
};

// Streams a recorded bundle to UI clients at rate_hz. Returns the number
// of frames sent.
std::size_t replay_bundle(const std::filesystem::path& bundle_dir, const ReplayOptions& options);

}  // namespace teleop
