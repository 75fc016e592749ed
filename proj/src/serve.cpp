#include "teleop/serve.hpp"

#include "teleop/bundle.hpp"
#include "teleop/ws_server.hpp"

#include <chrono>
#include <thread>

namespace teleop {
namespace {

double wall_now() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

bool stopping(const std::atomic<bool>* stop) { return stop != nullptr && stop->load(); }

}  // namespace

SessionResult serve_session(const SessionConfig& config, const ServeOptions& options) {
  SessionConfig cfg = config;
  cfg.transport = TransportKind::Loopback;
  ui::Bridge bridge(cfg.ui);
  ui::WsServer server(bridge, options.ws_port, cfg.ui.rate_hz, options.static_dir);
  if (options.on_listening) options.on_listening(server.port());

  std::optional<BundleWriter> writer;
  if (options.bundle_dir) writer.emplace(*options.bundle_dir, cfg);

  bool paused_now = true;
  RunOptions run;
  run.real_time = true;
  run.start_paused = true;
  run.stop = options.stop;
  if (cfg.leader_source == LeaderSource::Ui) run.operator_input = bridge.operator_input();
  run.control = [&](ControllerNode& controller, bool& paused) {
    for (const auto action : bridge.take_controls()) {
      if (action == ui::ControlAction::Start) paused = false;
      if (action == ui::ControlAction::Pause) paused = true;
      if (action == ui::ControlAction::NextTrial) controller.skip_current_trial();
    }
    paused_now = paused;
  };
  WorldSnapshot last;
  run.on_snapshot = [&](const WorldSnapshot& s) {
    last = s;
    bridge.publish(s, paused_now, wall_now());
  };

  SessionResult result = run_session(cfg, writer ? &*writer : nullptr, run);
  if (writer) writer->finish(result);

  last.finished = true;
  while (!options.exit_when_finished && !stopping(options.stop)) {
    bridge.publish(last, false, wall_now());
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  bridge.publish_now(last, false);
  return result;
}

std::size_t replay_bundle(const std::filesystem::path& bundle_dir, const ReplayOptions& options) {
  ui::ReplaySource source(bundle_dir);
  UiParams params;
  params.rate_hz = options.rate_hz;
  ui::Bridge bridge(params);
  ui::WsServer server(bridge, options.ws_port, options.rate_hz);
  if (options.on_listening) options.on_listening(server.port());

  while (options.wait_for_client && server.clients() == 0 && !stopping(options.stop)) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  const double period = 1.0 / options.rate_hz;
  const auto step = std::chrono::microseconds(static_cast<long>(period * 1e6));
  auto wall = std::chrono::steady_clock::now();
  std::size_t frames = 0;
  while (!stopping(options.stop)) {
    auto s = source.next(period);
    if (!s) break;
    bridge.publish_now(*s, false);
    ++frames;
    wall += step;
    std::this_thread::sleep_until(wall);
  }
  // Let the last frame reach the clients.
  std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(2000.0 * period)));
  return frames;
}

}  // namespace teleop
