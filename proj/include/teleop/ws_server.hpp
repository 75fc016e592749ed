#pragma once

#include "teleop/ui_bridge.hpp"

#include <filesystem>
#include <memory>
#include <string>

namespace teleop::ui {

// WebSocket endpoint `/ws` plus optional static files, served from a
// background thread. Each client receives every new state frame published
// on the bridge (polled at rate_hz) and may send commands.
class WsServer {
 public:
  WsServer(Bridge& bridge, std::uint16_t port, double rate_hz, std::filesystem::path static_dir = {},
           const std::string& address = "127.0.0.1");
  ~WsServer();

  WsServer(const WsServer&) = delete;
  WsServer& operator=(const WsServer&) = delete;

  std::uint16_t port() const;
  std::size_t clients() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace teleop::ui
