#pragma once

#include "teleop/coupling.hpp"
#include "teleop/follower_plant.hpp"
#include "teleop/kinematics.hpp"
#include "teleop/leader_device.hpp"
#include "teleop/metrics.hpp"
#include "teleop/operators.hpp"
#include "teleop/task_engine.hpp"
#include "teleop/transport.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

namespace teleop {

enum class TransportKind : std::uint8_t { Loopback, Udp };
enum class LeaderSource : std::uint8_t { Scripted, Ui };

std::string_view to_string(TransportKind k);
std::string_view to_string(LeaderSource s);

struct UdpConfig {
  net::Endpoint leader{"127.0.0.1", 47101};
  net::Endpoint controller{"127.0.0.1", 47102};
  net::Endpoint follower{"127.0.0.1", 47103};
  double send_rate_hz = 450.0;
  double handshake_timeout_s = 2.0;
  std::size_t queue_capacity = 1024;
};

struct AnalysisParams {
  double lowpass_hz = 20.0;
  bool zero_phase = true;
  metrics::SparcParams sparc;
  double outlier_k = 2.0;
  bool include_hold = true;  // SPARC segment runs to confirmation, hold included
};

struct UiParams {
  double rate_hz = 50.0;
  double command_rate_limit = 200.0;  // commands per second
};

struct SessionConfig {
  std::optional<std::uint64_t> seed = 42;
  std::string output_dir = "out";
  ScheduleConfig schedule;
  int max_trials = 0;  // 0 runs the whole schedule
  TransportKind transport = TransportKind::Loopback;
  UdpConfig udp;
  LeaderSource leader_source = LeaderSource::Scripted;
  FrameMap frame;
  CouplingParams coupling;
  PlantParams plant;
  KinematicParams kinematics;
  DeviceParams device;
  TaskParams task;
  TrainerParams trainer;
  TraineeParams trainee;
  net::LinkModel link;
  AnalysisParams analysis;
  UiParams ui;
  PoseLibrary poses;

  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parses TOML text. Every key is optional and defaults to the values above;
// unknown tables or keys are rejected.
SessionConfig parse_config(const std::string& toml_text);
SessionConfig load_config(const std::filesystem::path& path);

// Canonical TOML rendering of every field; parse_config(to_toml(c)) == c.
std::string to_toml(const SessionConfig& config);

}  // namespace teleop
