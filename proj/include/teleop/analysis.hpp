#pragma once

#include "teleop/config.hpp"
#include "teleop/metrics.hpp"
#include "teleop/session.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace teleop {

class MalformedLog : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TickSample {
  std::int64_t t_us = 0;
  Vec3 elbow = Vec3::Zero();
  Vec3 wrist = Vec3::Zero();
};

// The parts of a session log the metrics pipeline consumes.
struct SessionLog {
  std::string label;
  std::vector<TickSample> ticks;
  std::vector<TaskEvent> events;
  bool truncated = false;
};

// Collects a SessionLog in memory while a session runs.
class LogCollector final : public SessionSink {
 public:
  void on_row(const LogRow& row) override;
  void on_event(const TaskEvent& event) override;
  SessionLog take() { return std::move(log_); }

 private:
  SessionLog log_;
};

// Strict readers; errors name the file and row.
SessionLog read_bundle(const std::filesystem::path& dir);
std::vector<TaskEvent> parse_events(std::istream& in, const std::string& source);

struct TrialSummary {
  std::string session;
  TrialSpec spec;
  double shown_at = 0.0;
  bool confirmed = false;
  std::optional<double> completion_s;
  std::optional<double> sparc_elbow;
  std::optional<double> sparc_wrist;
};

std::vector<TrialSummary> summarize_trials(const SessionLog& log, const AnalysisParams& params);

struct MetricStats {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
};

struct ConditionAggregate {
  std::size_t trials = 0;
  std::size_t confirmed = 0;
  std::size_t unconfirmed = 0;
  MetricStats completion_s;
  MetricStats sparc_elbow;
  MetricStats sparc_wrist;
  std::map<int, ConditionAggregate> blocks;  // block number -> aggregate; empty inside blocks
};

struct OutlierRow {
  std::string metric;
  Condition condition = Condition::VD;
  metrics::OutlierReport report;
};

struct AnalysisResult {
  std::vector<TrialSummary> trials;
  std::vector<OutlierRow> outliers;
  std::map<Condition, ConditionAggregate> conditions;
  std::size_t sessions = 0;
  double outlier_k = 2.0;
};

// Familiarization and unconfirmed trials are excluded from screening and
// aggregation. Outliers are screened per (metric, condition) and the
// aggregates use the kept values.
AnalysisResult analyze(const std::vector<TrialSummary>& trials, std::size_t sessions, double outlier_k);

std::string trials_csv(const std::vector<TrialSummary>& trials);
std::string outliers_csv(const std::vector<OutlierRow>& rows);
std::string summary_json(const AnalysisResult& result);

// Analyzes one bundle or a directory of bundles and writes trials.csv,
// outliers.csv and summary.json into out. Inputs are only read.
AnalysisResult analyze_path(const std::filesystem::path& in, const std::filesystem::path& out);

}  // namespace teleop
