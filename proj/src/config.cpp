#include "teleop/config.hpp"

#include <toml.hpp>

#include <charconv>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace teleop {
namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

// Reads keys from one table and remembers which ones were consumed so
// leftovers can be reported as unknown.
class TableReader {
 public:
  TableReader(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  void number(const char* key, double& out) {
    if (const toml::node* n = find(key)) {
      const auto v = n->value<double>();
      if (!v) fail(key, "expected a number");
      out = *v;
    }
  }
  void integer(const char* key, int& out) {
    if (const toml::node* n = find(key)) {
      const auto v = n->value<std::int64_t>();
      if (!v || !n->is_integer()) fail(key, "expected an integer");
      out = static_cast<int>(*v);
    }
  }
  void boolean(const char* key, bool& out) {
    if (const toml::node* n = find(key)) {
      const auto v = n->value<bool>();
      if (!v) fail(key, "expected true or false");
      out = *v;
    }
  }
  std::optional<std::string> string(const char* key) {
    if (const toml::node* n = find(key)) {
      const auto v = n->value<std::string>();
      if (!v) fail(key, "expected a string");
      return *v;
    }
    return std::nullopt;
  }
  template <int N>
  void vector(const char* key, Eigen::Matrix<double, N, 1>& out) {
    if (const toml::node* n = find(key)) {
      const toml::array* arr = n->as_array();
      if (arr == nullptr || arr->size() != static_cast<std::size_t>(N)) {
        fail(key, "expected an array of " + std::to_string(N) + " numbers");
      }
      for (int i = 0; i < N; ++i) {
        const auto v = (*arr)[static_cast<std::size_t>(i)].value<double>();
        if (!v) fail(key, "expected an array of numbers");
        out[i] = *v;
      }
    }
  }
  void endpoint(const char* key, net::Endpoint& out) {
    if (auto s = string(key)) {
      try {
        out = net::parse_endpoint(*s);
      } catch (const std::invalid_argument& e) {
        fail(key, e.what());
      }
    }
  }

  void mark(const std::string& key) { used_.insert(key); }

  void finish() const {
    if (table_ == nullptr) return;
    for (const auto& [k, v] : *table_) {
      if (!used_.contains(std::string(k.str()))) {
        throw ConfigError("unknown key '" + qualified(std::string(k.str())) + "'");
      }
    }
  }

 private:
  const toml::node* find(const char* key) {
    if (table_ == nullptr) return nullptr;
    used_.insert(key);
    return table_->get(key);
  }
  std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }
  [[noreturn]] void fail(const char* key, const std::string& why) const {
    throw ConfigError("config key '" + qualified(key) + "': " + why);
  }

  const toml::table* table_;
  std::string name_;
  std::set<std::string> used_;
};

const toml::table* subtable(const toml::table& root, const char* name) {
  const toml::node* n = root.get(name);
  if (n == nullptr) return nullptr;
  if (!n->is_table()) throw ConfigError("'" + std::string(name) + "' must be a table");
  return n->as_table();
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

template <typename Derived>
std::string fmt_vec(const Eigen::MatrixBase<Derived>& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += fmt(v[i]);
  }
  return s + "]";
}

std::string fmt_ep(const net::Endpoint& e) { return "\"" + e.host + ":" + std::to_string(e.port) + "\""; }

}  // namespace

std::string_view to_string(TransportKind k) { return k == TransportKind::Loopback ? "loopback" : "udp"; }
std::string_view to_string(LeaderSource s) { return s == LeaderSource::Scripted ? "scripted" : "ui"; }

void SessionConfig::validate() const {
  if (max_trials < 0) throw ConfigError("max_trials must be >= 0");
  frame.validate();
  coupling.validate();
  plant.validate();
  kinematics.validate();
  device.validate();
  task.validate();
  trainer.validate();
  trainee.validate();
  link.validate();
  analysis.sparc.validate();
  if (!(analysis.lowpass_hz > 0.0 && analysis.lowpass_hz < 0.5 / plant.dt)) {
    throw ConfigError("analysis lowpass_hz must lie in (0, fs/2)");
  }
  if (!(analysis.outlier_k >= 0.0)) throw ConfigError("outlier_k must be >= 0");
  if (!(ui.rate_hz > 0.0) || !(ui.command_rate_limit > 0.0)) throw ConfigError("ui rates must be positive");
  if (!(udp.send_rate_hz > 0.0) || !(udp.handshake_timeout_s > 0.0)) {
    throw ConfigError("udp send rate and handshake timeout must be positive");
  }
  const double dt_us = plant.dt * 1e6;
  if (std::abs(dt_us - std::round(dt_us)) > 1e-6) throw ConfigError("plant dt must be a whole number of microseconds");
  for (int i = 0; i <= 5; ++i) {
    if (!kinematics.limits.contains(poses.joints(static_cast<PoseId>(i)))) {
      throw ConfigError("pose '" + std::string(to_string(static_cast<PoseId>(i))) +
                        "' lies outside the joint limits");
    }
  }
}

SessionConfig parse_config(const std::string& toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "TOML parse error: " << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError(os.str());
  }

  SessionConfig c;
  static const std::set<std::string> kTables = {"session", "transport", "leader",  "frame_map", "coupling",
                                                "plant",   "kinematics", "device", "task",      "trainer",
                                                "trainee", "link",       "metrics", "ui",       "poses"};
  TableReader top(&root, "");
  for (const auto& [k, v] : root) {
    if (v.is_table() && !kTables.contains(std::string(k.str()))) {
      throw ConfigError("unknown table [" + std::string(k.str()) + "]");
    }
  }
  for (const auto& name : kTables) top.mark(name);

  if (const toml::node* n = root.get("seed")) {
    const auto v = n->value<std::int64_t>();
    if (!v || *v < 0) throw ConfigError("config key 'seed': expected a non-negative integer");
    c.seed = static_cast<std::uint64_t>(*v);
  } else {
    c.seed.reset();
  }
  if (auto s = top.string("output_dir")) c.output_dir = *s;
  top.mark("seed");
  top.finish();

  {
    TableReader t(subtable(root, "session"), "session");
    if (auto s = t.string("condition_order")) c.schedule.order = parse_condition_order(*s);
    t.integer("blocks_per_condition", c.schedule.blocks_per_condition);
    t.integer("familiarization_trials", c.schedule.familiarization_trials);
    t.integer("max_trials", c.max_trials);
    t.finish();
  }
  {
    TableReader t(subtable(root, "transport"), "transport");
    if (auto s = t.string("kind")) {
      if (*s == "loopback") {
        c.transport = TransportKind::Loopback;
      } else if (*s == "udp") {
        c.transport = TransportKind::Udp;
      } else {
        throw ConfigError("transport.kind must be 'loopback' or 'udp'");
      }
    }
    t.endpoint("leader", c.udp.leader);
    t.endpoint("controller", c.udp.controller);
    t.endpoint("follower", c.udp.follower);
    t.number("send_rate_hz", c.udp.send_rate_hz);
    t.number("handshake_timeout_s", c.udp.handshake_timeout_s);
    int cap = static_cast<int>(c.udp.queue_capacity);
    t.integer("queue_capacity", cap);
    if (cap < 1) throw ConfigError("transport.queue_capacity must be >= 1");
    c.udp.queue_capacity = static_cast<std::size_t>(cap);
    t.finish();
  }
  {
    TableReader t(subtable(root, "leader"), "leader");
    if (auto s = t.string("source")) {
      if (*s == "scripted") {
        c.leader_source = LeaderSource::Scripted;
      } else if (*s == "ui") {
        c.leader_source = LeaderSource::Ui;
      } else {
        throw ConfigError("leader.source must be 'scripted' or 'ui'");
      }
    }
    t.finish();
  }
  {
    TableReader t(subtable(root, "frame_map"), "frame_map");
    double theta_deg = c.frame.theta * kDegPerRad;
    t.number("theta_deg", theta_deg);
    c.frame.theta = theta_deg / kDegPerRad;
    t.number("scale", c.frame.scale);
    t.vector("offset", c.frame.offset);
    t.integer("rotation_sign", c.frame.rotation_sign);
    t.finish();
  }
  {
    TableReader t(subtable(root, "coupling"), "coupling");
    t.number("P_s", c.coupling.gains.leader_stiffness);
    t.number("B_s", c.coupling.gains.leader_damping);
    t.number("P_a", c.coupling.gains.follower_stiffness);
    t.number("B_a", c.coupling.gains.follower_damping);
    t.number("grab_radius", c.coupling.grab_radius);
    t.number("torque_limit", c.coupling.torque_limit);
    t.number("breakaway", c.coupling.breakaway);
    t.finish();
  }
  {
    TableReader t(subtable(root, "plant"), "plant");
    t.vector("joint_damping", c.plant.joint_damping);
    t.number("weight_comp", c.plant.weight_comp);
    t.vector("baseline_viscous", c.plant.baseline_viscous);
    t.number("dt", c.plant.dt);
    t.finish();
  }
  {
    TableReader t(subtable(root, "kinematics"), "kinematics");
    t.vector("shoulder_origin", c.kinematics.shoulder_origin);
    t.number("upper_length", c.kinematics.upper_length);
    t.number("fore_length", c.kinematics.fore_length);
    t.number("upper_mass", c.kinematics.upper_mass);
    t.number("fore_mass", c.kinematics.fore_mass);
    t.number("com_ratio", c.kinematics.com_ratio);
    t.number("gravity", c.kinematics.gravity);
    t.vector("q_min", c.kinematics.limits.lower);
    t.vector("q_max", c.kinematics.limits.upper);
    t.finish();
  }
  {
    TableReader t(subtable(root, "device"), "device");
    t.number("max_force", c.device.limits.max_force);
    t.number("max_grasp_force", c.device.limits.max_grasp_force);
    t.number("workspace_diameter", c.device.limits.workspace_diameter);
    t.number("workspace_height", c.device.limits.workspace_height);
    t.number("time_constant", c.device.time_constant);
    t.finish();
  }
  {
    TableReader t(subtable(root, "task"), "task");
    t.number("match_tol", c.task.match_tol);
    t.number("hold_s", c.task.hold_s);
    t.number("base_hold_s", c.task.base_hold_s);
    t.number("trial_timeout_s", c.task.trial_timeout_s);
    t.finish();
  }
  {
    TableReader t(subtable(root, "trainer"), "trainer");
    t.number("approach_s", c.trainer.approach_s);
    t.number("transport_s", c.trainer.transport_s);
    t.number("settle_tol", c.trainer.settle_tol);
    t.number("settle_s", c.trainer.settle_s);
    t.number("hold_timeout_s", c.trainer.hold_timeout_s);
    t.number("release_s", c.trainer.release_s);
    t.number("grab_timeout_s", c.trainer.grab_timeout_s);
    if (auto s = t.string("first_point")) {
      if (*s == "elbow") {
        c.trainer.first_point = PointId::Elbow;
      } else if (*s == "wrist") {
        c.trainer.first_point = PointId::Wrist;
      } else {
        throw ConfigError("trainer.first_point must be 'elbow' or 'wrist'");
      }
    }
    t.finish();
  }
  c.trainer.grab_radius = c.coupling.grab_radius;
  {
    TableReader t(subtable(root, "trainee"), "trainee");
    t.number("reaction_s", c.trainee.reaction_s);
    t.vector("kp", c.trainee.kp);
    t.vector("kd", c.trainee.kd);
    t.number("imitation_noise", c.trainee.imitation_noise);
    t.number("correction_s", c.trainee.correction_s);
    t.number("self_support", c.trainee.self_support);
    t.finish();
  }
  {
    TableReader t(subtable(root, "link"), "link");
    t.number("base_latency", c.link.base_latency);
    t.number("jitter", c.link.jitter);
    t.number("drop_prob", c.link.drop_prob);
    int link_seed = static_cast<int>(c.link.seed);
    t.integer("seed", link_seed);
    if (link_seed < 0) throw ConfigError("link.seed must be >= 0");
    c.link.seed = static_cast<std::uint64_t>(link_seed);
    t.finish();
  }
  {
    TableReader t(subtable(root, "metrics"), "metrics");
    t.number("lowpass_hz", c.analysis.lowpass_hz);
    t.boolean("zero_phase", c.analysis.zero_phase);
    t.number("w_max", c.analysis.sparc.w_max);
    t.number("amp_threshold", c.analysis.sparc.amp_threshold);
    t.integer("pad_level", c.analysis.sparc.pad_level);
    t.number("outlier_k", c.analysis.outlier_k);
    t.boolean("include_hold", c.analysis.include_hold);
    t.finish();
  }
  {
    TableReader t(subtable(root, "ui"), "ui");
    t.number("rate_hz", c.ui.rate_hz);
    t.number("command_rate_limit", c.ui.command_rate_limit);
    t.finish();
  }
  {
    TableReader t(subtable(root, "poses"), "poses");
    for (int i = 0; i <= 5; ++i) {
      const auto id = static_cast<PoseId>(i);
      Joints q = c.poses.joints(id);
      t.vector(std::string(to_string(id)).c_str(), q);
      c.poses.set_joints(id, q);
    }
    t.finish();
  }

  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return c;
}

SessionConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_toml(const SessionConfig& c) {
  std::ostringstream o;
  if (c.seed) o << "seed = " << *c.seed << "\n";
  o << "output_dir = \"" << c.output_dir << "\"\n\n";

  o << "[session]\n"
    << "condition_order = \"" << to_string(c.schedule.order) << "\"\n"
    << "blocks_per_condition = " << c.schedule.blocks_per_condition << "\n"
    << "familiarization_trials = " << c.schedule.familiarization_trials << "\n"
    << "max_trials = " << c.max_trials << "\n\n";

  o << "[transport]\n"
    << "kind = \"" << to_string(c.transport) << "\"\n"
    << "leader = " << fmt_ep(c.udp.leader) << "\n"
    << "controller = " << fmt_ep(c.udp.controller) << "\n"
    << "follower = " << fmt_ep(c.udp.follower) << "\n"
    << "send_rate_hz = " << fmt(c.udp.send_rate_hz) << "\n"
    << "handshake_timeout_s = " << fmt(c.udp.handshake_timeout_s) << "\n"
    << "queue_capacity = " << c.udp.queue_capacity << "\n\n";

  o << "[leader]\nsource = \"" << to_string(c.leader_source) << "\"\n\n";

  o << "[frame_map]\n"
    << "theta_deg = " << fmt(c.frame.theta * kDegPerRad) << "\n"
    << "scale = " << fmt(c.frame.scale) << "\n"
    << "offset = " << fmt_vec(c.frame.offset) << "\n"
    << "rotation_sign = " << c.frame.rotation_sign << "\n\n";

  o << "[coupling]\n"
    << "P_s = " << fmt(c.coupling.gains.leader_stiffness) << "\n"
    << "B_s = " << fmt(c.coupling.gains.leader_damping) << "\n"
    << "P_a = " << fmt(c.coupling.gains.follower_stiffness) << "\n"
    << "B_a = " << fmt(c.coupling.gains.follower_damping) << "\n"
    << "grab_radius = " << fmt(c.coupling.grab_radius) << "\n"
    << "torque_limit = " << fmt(c.coupling.torque_limit) << "\n"
    << "breakaway = " << fmt(c.coupling.breakaway) << "\n\n";

  o << "[plant]\n"
    << "joint_damping = " << fmt_vec(c.plant.joint_damping) << "\n"
    << "weight_comp = " << fmt(c.plant.weight_comp) << "\n"
    << "baseline_viscous = " << fmt_vec(c.plant.baseline_viscous) << "\n"
    << "dt = " << fmt(c.plant.dt) << "\n\n";

  o << "[kinematics]\n"
    << "shoulder_origin = " << fmt_vec(c.kinematics.shoulder_origin) << "\n"
    << "upper_length = " << fmt(c.kinematics.upper_length) << "\n"
    << "fore_length = " << fmt(c.kinematics.fore_length) << "\n"
    << "upper_mass = " << fmt(c.kinematics.upper_mass) << "\n"
    << "fore_mass = " << fmt(c.kinematics.fore_mass) << "\n"
    << "com_ratio = " << fmt(c.kinematics.com_ratio) << "\n"
    << "gravity = " << fmt(c.kinematics.gravity) << "\n"
    << "q_min = " << fmt_vec(c.kinematics.limits.lower) << "\n"
    << "q_max = " << fmt_vec(c.kinematics.limits.upper) << "\n\n";

  o << "[device]\n"
    << "max_force = " << fmt(c.device.limits.max_force) << "\n"
    << "max_grasp_force = " << fmt(c.device.limits.max_grasp_force) << "\n"
    << "workspace_diameter = " << fmt(c.device.limits.workspace_diameter) << "\n"
    << "workspace_height = " << fmt(c.device.limits.workspace_height) << "\n"
    << "time_constant = " << fmt(c.device.time_constant) << "\n\n";

  o << "[task]\n"
    << "match_tol = " << fmt(c.task.match_tol) << "\n"
    << "hold_s = " << fmt(c.task.hold_s) << "\n"
    << "base_hold_s = " << fmt(c.task.base_hold_s) << "\n"
    << "trial_timeout_s = " << fmt(c.task.trial_timeout_s) << "\n\n";

  o << "[trainer]\n"
    << "approach_s = " << fmt(c.trainer.approach_s) << "\n"
    << "transport_s = " << fmt(c.trainer.transport_s) << "\n"
    << "settle_tol = " << fmt(c.trainer.settle_tol) << "\n"
    << "settle_s = " << fmt(c.trainer.settle_s) << "\n"
    << "hold_timeout_s = " << fmt(c.trainer.hold_timeout_s) << "\n"
    << "release_s = " << fmt(c.trainer.release_s) << "\n"
    << "grab_timeout_s = " << fmt(c.trainer.grab_timeout_s) << "\n"
    << "first_point = \"" << to_string(c.trainer.first_point) << "\"\n\n";

  o << "[trainee]\n"
    << "reaction_s = " << fmt(c.trainee.reaction_s) << "\n"
    << "kp = " << fmt_vec(c.trainee.kp) << "\n"
    << "kd = " << fmt_vec(c.trainee.kd) << "\n"
    << "imitation_noise = " << fmt(c.trainee.imitation_noise) << "\n"
    << "correction_s = " << fmt(c.trainee.correction_s) << "\n"
    << "self_support = " << fmt(c.trainee.self_support) << "\n\n";

  o << "[link]\n"
    << "base_latency = " << fmt(c.link.base_latency) << "\n"
    << "jitter = " << fmt(c.link.jitter) << "\n"
    << "drop_prob = " << fmt(c.link.drop_prob) << "\n"
    << "seed = " << c.link.seed << "\n\n";

  o << "[metrics]\n"
    << "lowpass_hz = " << fmt(c.analysis.lowpass_hz) << "\n"
    << "zero_phase = " << (c.analysis.zero_phase ? "true" : "false") << "\n"
    << "w_max = " << fmt(c.analysis.sparc.w_max) << "\n"
    << "amp_threshold = " << fmt(c.analysis.sparc.amp_threshold) << "\n"
    << "pad_level = " << c.analysis.sparc.pad_level << "\n"
    << "outlier_k = " << fmt(c.analysis.outlier_k) << "\n"
    << "include_hold = " << (c.analysis.include_hold ? "true" : "false") << "\n\n";

  o << "[ui]\n"
    << "rate_hz = " << fmt(c.ui.rate_hz) << "\n"
    << "command_rate_limit = " << fmt(c.ui.command_rate_limit) << "\n\n";

  o << "[poses]\n";
  for (int i = 0; i <= 5; ++i) {
    const auto id = static_cast<PoseId>(i);
    o << to_string(id) << " = " << fmt_vec(c.poses.joints(id)) << "\n";
  }
  return o.str();
}

}  // namespace teleop
