#include "teleop/analysis.hpp"
#include "teleop/bundle.hpp"
#include "teleop/config.hpp"
#include "teleop/coupling.hpp"
#include "teleop/kinematics.hpp"
#include "teleop/metrics.hpp"
#include "teleop/netproto.hpp"
#include "teleop/session.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

using namespace teleop;

SessionConfig make_config(const std::optional<std::string>& toml_text) {
  return toml_text ? parse_config(*toml_text) : SessionConfig{};
}

py::dict result_dict(const SessionResult& r, const std::filesystem::path& dir) {
  py::list trials;
  for (const auto& t : r.trials) {
    trials.append(py::dict("trial_id"_a = t.spec.trial_id, "condition"_a = std::string(to_string(t.spec.condition)),
                           "block"_a = t.spec.block, "familiarization"_a = t.spec.familiarization,
                           "pose"_a = std::string(to_string(t.spec.pose)), "shown_at"_a = t.shown_at,
                           "confirmed_at"_a = t.confirmed_at));
  }
  return py::dict("status"_a = std::string(to_string(r.status)), "fault"_a = r.fault, "seed"_a = r.seed,
                  "ticks"_a = r.ticks, "sim_time"_a = r.sim_time, "trials"_a = trials,
                  "bundle"_a = dir.empty() ? py::none() : py::cast(dir.string()));
}

py::dict run_one(const std::optional<std::string>& toml_text, std::optional<std::uint64_t> seed,
             std::optional<std::filesystem::path> out) {
  SessionConfig cfg = make_config(toml_text);
  if (seed) cfg.seed = *seed;
  cfg.seed = effective_seed(cfg);
  cfg.validate();
  SessionResult r;
  {
    py::gil_scoped_release release;
    if (out) {
      BundleWriter w(*out, cfg);
      r = run_session(cfg, &w);
      w.finish(r);
    } else {
      r = run_session(cfg, nullptr);
    }
  }
  return result_dict(r, out.value_or(std::filesystem::path{}));
}

py::dict analyze_dirs(const std::filesystem::path& in, const std::filesystem::path& out) {
  AnalysisResult r;
  {
    py::gil_scoped_release release;
    r = analyze_path(in, out);
  }
  py::dict conds;
  for (const auto& [c, agg] : r.conditions) {
    auto stats = [](const MetricStats& s) {
      return py::dict("n"_a = s.n, "mean"_a = s.n ? py::cast(s.mean) : py::none(),
                      "median"_a = s.n ? py::cast(s.median) : py::none());
    };
    conds[py::str(std::string(to_string(c)))] =
        py::dict("trials"_a = agg.trials, "confirmed"_a = agg.confirmed, "completion_s"_a = stats(agg.completion_s),
                 "sparc_elbow"_a = stats(agg.sparc_elbow), "sparc_wrist"_a = stats(agg.sparc_wrist));
  }
  return py::dict("sessions"_a = r.sessions, "trials"_a = r.trials.size(), "conditions"_a = conds);
}

py::dict outliers(const std::vector<double>& values, double k) {
  const auto r = metrics::remove_outliers(values, k);
  const auto& s = r.report;
  return py::dict("kept"_a = r.kept, "removed"_a = r.removed, "n"_a = s.n, "percent_removed"_a = s.percent_removed,
                  "q1"_a = s.q1, "q3"_a = s.q3, "lower_fence"_a = s.lower_fence, "upper_fence"_a = s.upper_fence,
                  "mean_before"_a = s.mean_before, "sd_before"_a = s.sd_before, "mean_after"_a = s.mean_after,
                  "sd_after"_a = s.sd_after);
}

PointId point_id(const std::string& name) {
  if (name == "elbow") return PointId::Elbow;
  if (name == "wrist") return PointId::Wrist;
  throw py::value_error("point must be 'elbow' or 'wrist'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Upper-limb teleoperation simulator core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<MalformedLog>(m, "MalformedLog", PyExc_ValueError);
  py::register_exception<JointLimitError>(m, "JointLimitError", PyExc_ValueError);

  m.def("default_config", [] { return to_toml(SessionConfig{}); }, "Default configuration as TOML text.");
  m.def("normalize_config", [](const std::string& text) { return to_toml(parse_config(text)); }, "toml_text"_a,
        "Parse, validate and re-emit a configuration.");

  m.def(
      "forward_kinematics",
      [](const Joints& q) {
        const auto g = forward_kinematics(q, KinematicParams{});
        return py::make_tuple(Vec3(g.elbow), Vec3(g.wrist));
      },
      "q"_a, "Elbow and wrist positions for joint angles q (6 values, rad).");
  m.def(
      "point_jacobian", [](const Joints& q, const std::string& point) {
        return PointJacobian(point_jacobian(q, point_id(point), KinematicParams{}));
      },
      "q"_a, "point"_a = "elbow");
  m.def("gravity_torques", [](const Joints& q) { return Joints(gravity_torques(q, KinematicParams{})); }, "q"_a);

  m.def("leader_to_follower", [](const Vec3& x) { return map_leader_to_follower(x, FrameMap{}); }, "x"_a);
  m.def("follower_to_leader", [](const Vec3& x) { return map_follower_to_leader(x, FrameMap{}); }, "x"_a);
  m.def(
      "coupling_forces",
      [](const Vec3& mapped, const Vec3& mapped_vel, const Vec3& point, const Vec3& point_vel) {
        const auto f = coupling_forces(mapped, mapped_vel, point, point_vel, CouplingGains{});
        return py::make_tuple(f.leader, f.follower);
      },
      "mapped"_a, "mapped_vel"_a, "point"_a, "point_vel"_a, "Leader and follower coupling forces.");

  m.def(
      "butterworth_lowpass",
      [](double fc, double fs) {
        const auto c = metrics::butterworth_lowpass(fc, fs);
        return py::make_tuple(c.b0, c.b1, c.a1);
      },
      "fc"_a, "fs"_a);
  m.def(
      "lowpass",
      [](const std::vector<double>& x, double fc, double fs, bool zero_phase) {
        return metrics::lowpass(x, fc, fs, zero_phase);
      },
      "x"_a, "fc"_a = 20.0, "fs"_a = 500.0, "zero_phase"_a = true);
  m.def(
      "sparc", [](const std::vector<double>& speeds, double fs) { return metrics::sparc(speeds, fs); }, "speeds"_a,
      "fs"_a = 500.0);
  m.def("remove_outliers", &outliers, "values"_a, "k"_a = 2.0);

  m.def("wire_size", [](const std::string& type) {
    if (type == "leader_state") return net::encoded_size(net::MsgType::LeaderState);
    if (type == "follower_state") return net::encoded_size(net::MsgType::FollowerState);
    if (type == "force_cmd") return net::encoded_size(net::MsgType::ForceCmd);
    if (type == "torque_cmd") return net::encoded_size(net::MsgType::TorqueCmd);
    if (type == "task_event") return net::encoded_size(net::MsgType::TaskEvent);
    throw py::value_error("unknown message type '" + type + "'");
  });

  m.def("run_session", &run_one, "config"_a = py::none(), "seed"_a = py::none(), "out"_a = py::none(),
        "Run one loopback session. config is TOML text; out, when given, receives the session bundle.");
  m.def("analyze", &analyze_dirs, "in_dir"_a, "out_dir"_a, "Analyze a bundle or a directory of bundles.");
  m.def("sha256_file", [](const std::filesystem::path& p) { return sha256_file(p); }, "path"_a);
}
