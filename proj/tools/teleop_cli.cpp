#include "teleop/analysis.hpp"
#include "teleop/bundle.hpp"
#include "teleop/config.hpp"
#include "teleop/serve.hpp"
#include "teleop/session.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <iostream>

namespace {

using namespace teleop;

constexpr int kExitError = 1;
constexpr int kExitFault = 3;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void install_signal_handlers() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

void print_summary(const SessionResult& r, const std::filesystem::path& dir) {
  std::size_t confirmed = 0, timed_out = 0, skipped = 0;
  for (const auto& t : r.trials) {
    if (t.confirmed_at) ++confirmed;
    if (t.timed_out) ++timed_out;
    if (t.skipped) ++skipped;
  }
  std::printf("status: %s\n", std::string(to_string(r.status)).c_str());
  if (!r.fault.empty()) std::printf("fault: %s\n", r.fault.c_str());
  std::printf("seed: %llu\n", static_cast<unsigned long long>(r.seed));
  std::printf("trials: %zu run, %zu confirmed, %zu timed out, %zu skipped\n", r.trials.size(), confirmed,
              timed_out, skipped);
  std::printf("simulated time: %.3f s over %llu ticks\n", r.sim_time, static_cast<unsigned long long>(r.ticks));
  if (!dir.empty()) std::printf("bundle: %s\n", dir.string().c_str());
}

int exit_code(const SessionResult& r) {
  switch (r.status) {
    case SessionStatus::Completed:
      return 0;
    case SessionStatus::Faulted:
      return kExitFault;
    case SessionStatus::Stopped:
      return kExitError;
  }
  return kExitError;
}

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string transport;
  std::string out;
  std::string node;
};

int cmd_run(const RunArgs& a) {
  SessionConfig cfg = load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.transport == "loopback") cfg.transport = TransportKind::Loopback;
  if (a.transport == "udp") cfg.transport = TransportKind::Udp;
  if (!a.out.empty()) cfg.output_dir = a.out;
  cfg.seed = effective_seed(cfg);
  cfg.validate();

  install_signal_handlers();
  if (!a.node.empty()) {
    if (cfg.transport != TransportKind::Udp) throw ConfigError("--node requires the udp transport");
    const net::NodeId id = a.node == "leader"       ? net::NodeId::Leader
                           : a.node == "controller" ? net::NodeId::Controller
                                                    : net::NodeId::Follower;
    std::optional<BundleWriter> writer;
    if (id == net::NodeId::Controller) writer.emplace(cfg.output_dir, cfg);
    SessionResult r = run_udp_node(cfg, id, writer ? &*writer : nullptr, &g_stop);
    if (writer) writer->finish(r);
    print_summary(r, writer ? writer->dir() : std::filesystem::path{});
    return exit_code(r);
  }

  BundleWriter writer(cfg.output_dir, cfg);
  RunOptions options;
  options.stop = &g_stop;
  SessionResult r = run_session(cfg, &writer, options);
  writer.finish(r);
  print_summary(r, writer.dir());
  return exit_code(r);
}

int cmd_analyze(const std::string& in, const std::string& out) {
  const AnalysisResult r = analyze_path(in, out);
  std::printf("sessions: %zu, trials: %zu\n", r.sessions, r.trials.size());
  for (const auto& [cond, agg] : r.conditions) {
    std::printf("%s: %zu analyzed, completion mean %.3f s, SPARC elbow %.3f, wrist %.3f\n",
                std::string(to_string(cond)).c_str(), agg.confirmed, agg.completion_s.mean, agg.sparc_elbow.mean,
                agg.sparc_wrist.mean);
  }
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int cmd_serve(const std::string& config, std::uint16_t port, const std::string& static_dir, const std::string& out,
              bool exit_when_finished) {
  SessionConfig cfg = load_config(config);
  cfg.seed = effective_seed(cfg);
  if (!out.empty()) cfg.output_dir = out;
  cfg.validate();
  install_signal_handlers();
  ServeOptions options;
  options.ws_port = port;
  options.static_dir = static_dir;
  options.bundle_dir = std::filesystem::path(cfg.output_dir);
  options.exit_when_finished = exit_when_finished;
  options.stop = &g_stop;
  options.on_listening = [](std::uint16_t p) {
    std::printf("listening on ws://127.0.0.1:%u/ws (send session_control start to begin)\n", p);
    std::fflush(stdout);
  };
  const SessionResult r = serve_session(cfg, options);
  print_summary(r, cfg.output_dir);
  return r.status == SessionStatus::Faulted ? kExitFault : 0;
}

int cmd_replay(const std::string& in, std::uint16_t port, double rate_hz, bool wait) {
  install_signal_handlers();
  ReplayOptions options;
  options.ws_port = port;
  options.rate_hz = rate_hz;
  options.wait_for_client = wait;
  options.stop = &g_stop;
  options.on_listening = [](std::uint16_t p) {
    std::printf("replaying on ws://127.0.0.1:%u/ws\n", p);
    std::fflush(stdout);
  };
  const std::size_t frames = replay_bundle(in, options);
  std::printf("sent %zu frames\n", frames);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Upper-limb haptic teleoperation simulator"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run one session and write a log bundle");
  run->add_option("--config", run_args.config, "Session config (TOML)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", run_args.seed, "Override the config seed");
  run->add_option("--transport", run_args.transport, "Transport override")
      ->check(CLI::IsMember({"loopback", "udp"}));
  run->add_option("--out", run_args.out, "Output bundle directory");
  run->add_option("--node", run_args.node, "Run a single UDP node in this process")
      ->check(CLI::IsMember({"leader", "controller", "follower"}));

  std::string an_in, an_out;
  auto* analyze = app.add_subcommand("analyze", "Compute trial metrics from one or more bundles");
  analyze->add_option("--in", an_in, "Bundle directory or directory of bundles")->required()->check(CLI::ExistingDirectory);
  analyze->add_option("--out", an_out, "Output directory")->required();

  std::string sv_config, sv_static, sv_out;
  std::uint16_t sv_port = 8765;
  bool sv_exit = false;
  auto* serve = app.add_subcommand("serve", "Run a live session behind the WebSocket interface");
  serve->add_option("--config", sv_config, "Session config (TOML)")->required()->check(CLI::ExistingFile);
  serve->add_option("--ws-port", sv_port, "WebSocket port (0 picks a free port)")->required();
  serve->add_option("--static", sv_static, "Directory of UI files served over HTTP")->check(CLI::ExistingDirectory);
  serve->add_option("--out", sv_out, "Output bundle directory");
  serve->add_flag("--exit-when-finished", sv_exit, "Exit once the session ends");

  std::string rp_in;
  std::uint16_t rp_port = 8765;
  double rp_rate = 50.0;
  bool rp_nowait = false;
  auto* replay = app.add_subcommand("replay", "Stream a recorded bundle over the WebSocket interface");
  replay->add_option("--in", rp_in, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  replay->add_option("--ws-port", rp_port, "WebSocket port (0 picks a free port)")->required();
  replay->add_option("--rate", rp_rate, "Frames per second")->check(CLI::PositiveNumber);
  replay->add_flag("--no-wait", rp_nowait, "Start streaming without waiting for a client");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_args);
    if (*analyze) return cmd_analyze(an_in, an_out);
    if (*serve) return cmd_serve(sv_config, sv_port, sv_static, sv_out, sv_exit);
    if (*replay) return cmd_replay(rp_in, rp_port, rp_rate, !rp_nowait);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
