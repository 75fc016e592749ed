#include "teleop/analysis.hpp"

#include "teleop/bundle.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace teleop {
namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

struct RowContext {
  const std::string& source;
  std::size_t row;
  [[noreturn]] void fail(const std::string& why) const {
    throw MalformedLog(source + " row " + std::to_string(row) + ": " + why);
  }
};

std::uint64_t parse_uint(std::string_view s, const RowContext& ctx, const char* what) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    ctx.fail(std::string("bad integer in ") + what);
  }
  return v;
}

template <typename F>
auto parse_enum(std::string_view s, const RowContext& ctx, const char* what, F&& parse) {
  try {
    return parse(s);
  } catch (const std::exception&) {
    ctx.fail(std::string("bad ") + what + " '" + std::string(s) + "'");
  }
}

bool is_marker(const std::string& line) { return line.rfind(kTruncationMarker, 0) == 0; }

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::optional<double> try_sparc(const SessionLog& log, std::size_t begin, std::size_t end, bool elbow,
                                double fs, const AnalysisParams& params) {
  if (end <= begin || end - begin < 3) return std::nullopt;
  metrics::Trajectory traj;
  traj.fs = fs;
  traj.samples.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) traj.samples.push_back(elbow ? log.ticks[i].elbow : log.ticks[i].wrist);
  try {
    const auto speeds = metrics::speed_profile(traj, params.lowpass_hz, params.zero_phase);
    return metrics::sparc(speeds, fs, params.sparc);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void append_opt(std::string& s, const std::optional<double>& v) {
  if (!v) return;
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), *v);
  s.append(buf, res.ptr);
}

MetricStats stats_of(const std::vector<double>& v) {
  MetricStats s;
  s.n = v.size();
  if (!v.empty()) {
    s.mean = metrics::mean(v);
    s.median = metrics::median(v);
  }
  return s;
}

nlohmann::ordered_json to_json(const MetricStats& s) {
  return {{"n", s.n}, {"mean", s.n ? nlohmann::ordered_json(s.mean) : nlohmann::ordered_json(nullptr)},
          {"median", s.n ? nlohmann::ordered_json(s.median) : nlohmann::ordered_json(nullptr)}};
}

nlohmann::ordered_json to_json(const ConditionAggregate& a) {
  nlohmann::ordered_json j;
  j["trials"] = a.trials;
  j["confirmed"] = a.confirmed;
  j["unconfirmed"] = a.unconfirmed;
  j["completion_s"] = to_json(a.completion_s);
  j["sparc_elbow"] = to_json(a.sparc_elbow);
  j["sparc_wrist"] = to_json(a.sparc_wrist);
  if (!a.blocks.empty()) {
    nlohmann::ordered_json b = nlohmann::ordered_json::object();
    for (const auto& [block, agg] : a.blocks) b[std::to_string(block)] = to_json(agg);
    j["blocks"] = b;
  }
  return j;
}

const std::optional<double>& metric_of(const TrialSummary& t, int m) {
  return m == 0 ? t.completion_s : (m == 1 ? t.sparc_elbow : t.sparc_wrist);
}

constexpr const char* kMetricNames[] = {"completion_s", "sparc_elbow", "sparc_wrist"};

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void LogCollector::on_row(const LogRow& row) {
  log_.ticks.push_back({static_cast<std::int64_t>(row.t_us), row.elbow, row.wrist});
}

void LogCollector::on_event(const TaskEvent& event) { log_.events.push_back(event); }

std::vector<TaskEvent> parse_events(std::istream& in, const std::string& source) {
  std::vector<TaskEvent> events;
  std::string line;
  std::size_t row = 1;
  if (!std::getline(in, line)) throw MalformedLog(source + ": empty file");
  strip_cr(line);
  if (line + "\n" != events_header()) throw MalformedLog(source + " row 1: unexpected header");
  while (std::getline(in, line)) {
    ++row;
    strip_cr(line);
    if (line.empty()) continue;
    if (is_marker(line)) break;
    const RowContext ctx{source, row};
    const auto f = split(line);
    if (f.size() != 7) ctx.fail("expected 7 fields, got " + std::to_string(f.size()));
    TaskEvent e;
    e.t = static_cast<double>(parse_enum(f[0], ctx, "t_s", [](std::string_view v) { return parse_time_us(v); })) * 1e-6;
    e.kind = parse_enum(f[1], ctx, "event", [](std::string_view s) { return parse_event_kind(s); });
    e.trial.trial_id = static_cast<std::uint32_t>(parse_uint(f[2], ctx, "trial_id"));
    e.trial.pose = parse_enum(f[3], ctx, "pose", [](std::string_view s) { return parse_pose(s); });
    e.trial.condition = parse_enum(f[4], ctx, "condition", [](std::string_view s) { return parse_condition(s); });
    e.trial.block = static_cast<std::uint8_t>(parse_uint(f[5], ctx, "block"));
    if (f[6] != "0" && f[6] != "1") ctx.fail("familiarization must be 0 or 1");
    e.trial.familiarization = f[6] == "1";
    events.push_back(e);
  }
  return events;
}

SessionLog read_bundle(const std::filesystem::path& dir) {
  SessionLog log;
  log.label = dir.filename().string();
  if (log.label.empty() || log.label == ".") log.label = std::filesystem::absolute(dir).parent_path().filename().string();

  const auto log_path = dir / kLogFile;
  const auto events_path = dir / kEventsFile;
  std::ifstream lin(log_path);
  if (!lin) throw MalformedLog("cannot open '" + log_path.string() + "'");
  std::ifstream ein(events_path);
  if (!ein) throw MalformedLog("cannot open '" + events_path.string() + "'");
  log.events = parse_events(ein, events_path.string());

  const std::string source = log_path.string();
  const std::string header = log_header();
  std::string line;
  if (!std::getline(lin, line)) throw MalformedLog(source + ": empty file");
  strip_cr(line);
  if (line + "\n" != header) throw MalformedLog(source + " row 1: unexpected header");
  std::size_t row = 1;
  std::int64_t spacing = 0;
  while (std::getline(lin, line)) {
    ++row;
    strip_cr(line);
    if (line.empty()) continue;
    if (is_marker(line)) {
      log.truncated = true;
      break;
    }
    const RowContext ctx{source, row};
    TickSample s;
    try {
      const LogRow r = parse_log_row(line);
      s = {static_cast<std::int64_t>(r.t_us), r.elbow, r.wrist};
    } catch (const std::invalid_argument& e) {
      ctx.fail(e.what());
    }

    if (!log.ticks.empty()) {
      const std::int64_t d = s.t_us - log.ticks.back().t_us;
      if (d <= 0) ctx.fail("timestamps must increase");
      if (spacing == 0) spacing = d;
      if (d != spacing) ctx.fail("non-uniform sample spacing");
    }
    log.ticks.push_back(s);
  }
  return log;
}

std::vector<TrialSummary> summarize_trials(const SessionLog& log, const AnalysisParams& params) {
  struct Timeline {
    TrialSpec spec;
    double shown = 0.0;
    std::optional<double> confirmed;
    std::optional<double> last_hold_start;
  };
  std::vector<Timeline> trials;
  std::map<std::uint32_t, std::size_t> index;
  for (const auto& e : log.events) {
    if (e.kind == TaskEventKind::TrialStarted) {
      index[e.trial.trial_id] = trials.size();
      trials.push_back({e.trial, e.t, std::nullopt, std::nullopt});
      continue;
    }
    const auto it = index.find(e.trial.trial_id);
    if (it == index.end()) continue;
    Timeline& tl = trials[it->second];
    if (e.kind == TaskEventKind::HoldStarted && !tl.confirmed) tl.last_hold_start = e.t;
    if (e.kind == TaskEventKind::PoseConfirmed) tl.confirmed = e.t;
  }

  double fs = 0.0;
  if (log.ticks.size() >= 2) fs = 1e6 / static_cast<double>(log.ticks[1].t_us - log.ticks[0].t_us);

  std::vector<TrialSummary> out;
  for (const auto& tl : trials) {
    TrialSummary s;
    s.session = log.label;
    s.spec = tl.spec;
    s.shown_at = tl.shown;
    s.confirmed = tl.confirmed.has_value();
    s.completion_s = metrics::completion_time(TrialRecord{tl.spec, tl.shown, tl.confirmed});
    if (tl.confirmed && fs > 0.0) {
      const std::int64_t begin_us = std::llround(tl.shown * 1e6);
      const double end_t = params.include_hold || !tl.last_hold_start ? *tl.confirmed : *tl.last_hold_start;
      const std::int64_t end_us = std::llround(end_t * 1e6);
      const auto by_time = [](const TickSample& a, std::int64_t t) { return a.t_us < t; };
      const auto b = std::lower_bound(log.ticks.begin(), log.ticks.end(), begin_us, by_time);
      const auto e = std::lower_bound(log.ticks.begin(), log.ticks.end(), end_us + 1, by_time);
      const auto bi = static_cast<std::size_t>(b - log.ticks.begin());
      const auto ei = static_cast<std::size_t>(e - log.ticks.begin());
      s.sparc_elbow = try_sparc(log, bi, ei, true, fs, params);
      s.sparc_wrist = try_sparc(log, bi, ei, false, fs, params);
    }
    out.push_back(std::move(s));
  }
  return out;
}

AnalysisResult analyze(const std::vector<TrialSummary>& trials, std::size_t sessions, double outlier_k) {
  AnalysisResult r;
  r.trials = trials;
  r.sessions = sessions;
  r.outlier_k = outlier_k;

  for (Condition c : {Condition::VD, Condition::HD}) {
    std::vector<const TrialSummary*> in_cond;
    ConditionAggregate agg;
    for (const auto& t : trials) {
      if (t.spec.familiarization || t.spec.condition != c) continue;
      ++agg.trials;
      (t.confirmed ? agg.confirmed : agg.unconfirmed) += 1;
      agg.blocks[t.spec.block].trials += 1;
      (t.confirmed ? agg.blocks[t.spec.block].confirmed : agg.blocks[t.spec.block].unconfirmed) += 1;
      if (t.confirmed) in_cond.push_back(&t);
    }
    if (agg.trials == 0) continue;

    for (int m = 0; m < 3; ++m) {
      std::vector<double> values;
      std::vector<const TrialSummary*> owners;
      for (const auto* t : in_cond) {
        if (const auto& v = metric_of(*t, m)) {
          values.push_back(*v);
          owners.push_back(t);
        }
      }
      std::vector<double> kept;
      std::map<int, std::vector<double>> kept_by_block;
      if (!values.empty()) {
        const auto screened = metrics::remove_outliers(values, outlier_k);
        r.outliers.push_back({kMetricNames[m], c, screened.report});
        for (std::size_t i = 0; i < values.size(); ++i) {
          if (screened.removed_mask[i]) continue;
          kept.push_back(values[i]);
          kept_by_block[owners[i]->spec.block].push_back(values[i]);
        }
      }
      auto assign = [m](ConditionAggregate& a, const std::vector<double>& v) {
        (m == 0 ? a.completion_s : (m == 1 ? a.sparc_elbow : a.sparc_wrist)) = stats_of(v);
      };
      assign(agg, kept);
      for (auto& [block, b] : agg.blocks) assign(b, kept_by_block[block]);
    }
    r.conditions[c] = agg;
  }
  return r;
}

std::string trials_csv(const std::vector<TrialSummary>& trials) {
  std::string s = "trial_id,condition,block,pose,confirmed,completion_s,sparc_elbow,sparc_wrist,familiarization,session\n";
  for (const auto& t : trials) {
    s += std::to_string(t.spec.trial_id) + ",";
    s += std::string(to_string(t.spec.condition)) + ",";
    s += std::to_string(t.spec.block) + ",";
    s += std::string(to_string(t.spec.pose)) + ",";
    s += t.confirmed ? "1," : "0,";
    append_opt(s, t.completion_s);
    s += ',';
    append_opt(s, t.sparc_elbow);
    s += ',';
    append_opt(s, t.sparc_wrist);
    s += t.spec.familiarization ? ",1," : ",0,";
    s += t.session + "\n";
  }
  return s;
}

std::string outliers_csv(const std::vector<OutlierRow>& rows) {
  std::string s =
      "metric,condition,n,removed,percent_removed,q1,q3,lower_fence,upper_fence,mean_before,sd_before,mean_after,"
      "sd_after\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    s += row.metric + "," + std::string(to_string(row.condition)) + "," + std::to_string(r.n) + "," +
         std::to_string(r.removed);
    for (double v : {r.percent_removed, r.q1, r.q3, r.lower_fence, r.upper_fence, r.mean_before, r.sd_before,
                     r.mean_after, r.sd_after}) {
      s += ',';
      append_opt(s, v);
    }
    s += '\n';
  }
  return s;
}

std::string summary_json(const AnalysisResult& result) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["sessions"] = result.sessions;
  j["outlier_k"] = result.outlier_k;
  j["outliers_removed_before_aggregation"] = true;
  nlohmann::ordered_json conds = nlohmann::ordered_json::object();
  for (const auto& [c, agg] : result.conditions) conds[std::string(to_string(c))] = to_json(agg);
  j["conditions"] = conds;
  return j.dump(2) + "\n";
}

AnalysisResult analyze_path(const std::filesystem::path& in, const std::filesystem::path& out) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(in)) throw std::runtime_error("input '" + in.string() + "' is not a directory");
  std::vector<fs::path> bundles;
  if (fs::exists(in / kLogFile)) {
    bundles.push_back(in);
  } else {
    for (const auto& entry : fs::directory_iterator(in)) {
      if (entry.is_directory() && fs::exists(entry.path() / kLogFile)) bundles.push_back(entry.path());
    }
    std::sort(bundles.begin(), bundles.end());
  }
  if (bundles.empty()) throw std::runtime_error("no log bundle found under '" + in.string() + "'");

  std::vector<TrialSummary> all;
  double outlier_k = AnalysisParams{}.outlier_k;
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    AnalysisParams params;
    if (fs::exists(bundles[i] / kConfigFile)) params = parse_config(read_file(bundles[i] / kConfigFile)).analysis;
    if (i == 0) outlier_k = params.outlier_k;
    const SessionLog log = read_bundle(bundles[i]);
    auto trials = summarize_trials(log, params);
    all.insert(all.end(), trials.begin(), trials.end());
  }
  AnalysisResult result = analyze(all, bundles.size(), outlier_k);

  fs::create_directories(out);
  const auto write = [&](const char* name, const std::string& text) {
    std::ofstream f(out / name, std::ios::binary);
    f << text;
    if (!f) throw std::runtime_error("cannot write '" + (out / name).string() + "'");
  };
  write("trials.csv", trials_csv(result.trials));
  write("outliers.csv", outliers_csv(result.outliers));
  write("summary.json", summary_json(result));
  return result;
}

}  // namespace teleop
