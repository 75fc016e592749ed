#include "metrics_support.hpp"
#include "support.hpp"
#include "teleop/analysis.hpp"
#include "teleop/bundle.hpp"
#include "teleop/operators.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace teleop {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TrialSummary summary(std::uint32_t id, Condition c, int block, double completion, bool fam = false) {
  TrialSummary s;
  s.session = "s";
  s.spec = {id, c, static_cast<std::uint8_t>(block), fam, PoseId::Exult};
  s.confirmed = true;
  s.completion_s = completion;
  s.sparc_elbow = -1.5;
  s.sparc_wrist = -1.6;
  return s;
}

// Two straight reaches driven by min-jerk profiles, logged at 500 Hz.
SessionLog synthetic_log() {
  SessionLog log;
  log.label = "synthetic";
  const Vec3 a(0.0, 0.0, -0.3), b(0.2, 0.0, -0.3);
  const double T = 1.0;
  for (std::int64_t k = 0; k <= 5000; ++k) {
    const double t = static_cast<double>(k) * 0.002;
    TickSample s;
    s.t_us = k * 2000;
    if (t < 2.0) s.elbow = a;
    else if (t < 2.0 + T) s.elbow = min_jerk(a, b, T, t - 2.0);
    else if (t < 6.0) s.elbow = b;
    else if (t < 6.0 + T) s.elbow = min_jerk(b, a, T, t - 6.0);
    else s.elbow = a;
    s.wrist = s.elbow + Vec3(0.0, 0.0, -0.25);
    log.ticks.push_back(s);
  }
  const TrialSpec vd{1, Condition::VD, 1, false, PoseId::Exult};
  const TrialSpec hd{2, Condition::HD, 1, false, PoseId::Drink};
  log.events = {{TaskEventKind::TrialStarted, 2.0, vd},  {TaskEventKind::HoldStarted, 3.0, vd},
                {TaskEventKind::PoseConfirmed, 4.5, vd}, {TaskEventKind::TrialStarted, 6.0, hd},
                {TaskEventKind::HoldStarted, 7.0, hd},  {TaskEventKind::HoldLost, 7.5, hd},
                {TaskEventKind::HoldStarted, 7.6, hd},  {TaskEventKind::PoseConfirmed, 9.1, hd}};
  return log;
}

TEST(Analysis, SummarizesSyntheticTrials) {
  const auto out = summarize_trials(synthetic_log(), AnalysisParams{});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_NEAR(*out[0].completion_s, 2.5, 1e-12);
  EXPECT_NEAR(*out[1].completion_s, 3.1, 1e-12);
  ASSERT_TRUE(out[0].sparc_elbow && out[0].sparc_wrist);
  // Wrist is a rigid translate of the elbow, so both smoothness values agree.
  EXPECT_NEAR(*out[0].sparc_elbow, *out[0].sparc_wrist, 1e-9);
  // One min-jerk reach padded by rest: a single submovement.
  std::vector<double> v;
  const auto log = synthetic_log();
  for (std::size_t i = 1000; i <= 2250; ++i) {
    const auto& p = log.ticks[i].elbow;
    const auto& q = log.ticks[i == 0 ? 0 : i - 1].elbow;
    v.push_back(i == 1000 ? 0.0 : (p - q).norm() / 0.002);
  }
  EXPECT_NEAR(*out[0].sparc_elbow, testing::sparc_oracle(v, 500.0), 0.1);
  EXPECT_GT(*out[0].sparc_elbow, -2.0);
}

TEST(Analysis, ConditionMeansMatchHandComputedValues) {
  std::vector<TrialSummary> t;
  t.push_back(summary(1, Condition::VD, 0, 40.0, true));  // familiarization, excluded
  t.push_back(summary(2, Condition::VD, 1, 4.0));
  t.push_back(summary(3, Condition::VD, 1, 6.0));
  t.push_back(summary(4, Condition::VD, 2, 5.0));
  t.push_back(summary(5, Condition::HD, 1, 10.0));
  t.push_back(summary(6, Condition::HD, 2, 12.0));
  auto unconfirmed = summary(7, Condition::HD, 2, 0.0);
  unconfirmed.confirmed = false;
  unconfirmed.completion_s.reset();
  t.push_back(unconfirmed);

  const auto r = analyze(t, 1, 2.0);
  const auto& vd = r.conditions.at(Condition::VD);
  const auto& hd = r.conditions.at(Condition::HD);
  EXPECT_EQ(vd.completion_s.n, 3u);
  EXPECT_NEAR(vd.completion_s.mean, 5.0, 1e-12);
  EXPECT_NEAR(vd.completion_s.median, 5.0, 1e-12);
  EXPECT_NEAR(vd.blocks.at(1).completion_s.mean, 5.0, 1e-12);
  EXPECT_NEAR(vd.blocks.at(2).completion_s.mean, 5.0, 1e-12);
  EXPECT_EQ(hd.completion_s.n, 2u);
  EXPECT_NEAR(hd.completion_s.mean, 11.0, 1e-12);
  EXPECT_EQ(hd.unconfirmed, 1u);
  EXPECT_EQ(r.trials.size(), t.size());
}

TEST(Analysis, LongTrialIsReportedAsOutlier) {
  std::vector<TrialSummary> t;
  for (std::uint32_t i = 0; i < 20; ++i) t.push_back(summary(i + 1, Condition::VD, 1, 19.0 + 0.1 * i));
  t.push_back(summary(21, Condition::VD, 1, 100.0));
  const auto r = analyze(t, 1, 2.0);
  const OutlierRow* row = nullptr;
  for (const auto& o : r.outliers)
    if (o.metric == "completion_s" && o.condition == Condition::VD) row = &o;
  ASSERT_NE(row, nullptr);
  EXPECT_EQ(row->report.n, 21u);
  EXPECT_EQ(row->report.removed, 1u);
  EXPECT_LT(row->report.upper_fence, 100.0);
  EXPECT_GT(row->report.mean_before, row->report.mean_after);
  EXPECT_NEAR(r.conditions.at(Condition::VD).completion_s.mean, 19.95, 1e-9);
  const std::string csv = outliers_csv(r.outliers);
  EXPECT_EQ(csv.rfind("metric,condition,n,removed,percent_removed,q1,q3,lower_fence,upper_fence,", 0), 0u);
  EXPECT_NE(csv.find("completion_s,VD,21,1,"), std::string::npos) << csv;
}

TEST(Analysis, TrialsCsvHeader) {
  const std::string csv = trials_csv({summary(1, Condition::HD, 2, 7.5)});
  std::istringstream in(csv);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "trial_id,condition,block,pose,confirmed,completion_s,sparc_elbow,sparc_wrist,familiarization,session");
  EXPECT_EQ(row.rfind("1,HD,2,", 0), 0u) << row;
}

class BundleFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(testing::temp_dir("analysis_bundle"));
    SessionConfig c;
    c.seed = 42;
    c.max_trials = 4;
    BundleWriter w(*dir_, c);
    w.finish(run_session(c, &w));
  }
  static void TearDownTestSuite() { delete dir_; }

  fs::path copy(const std::string& name) {
    const auto d = testing::temp_dir(name);
    fs::copy(*dir_, d, fs::copy_options::overwrite_existing | fs::copy_options::recursive);
    return d;
  }
  static void replace_line(const fs::path& file, std::size_t line_no, const std::string& text) {
    std::istringstream in(slurp(file));
    std::string out, line;
    for (std::size_t n = 1; std::getline(in, line); ++n) out += (n == line_no ? text : line) + "\n";
    std::ofstream(file, std::ios::binary) << out;
  }

  static fs::path* dir_;
};
fs::path* BundleFixture::dir_ = nullptr;

TEST_F(BundleFixture, ReadBackMatchesRun) {
  const SessionLog log = read_bundle(*dir_);
  EXPECT_FALSE(log.truncated);
  EXPECT_GT(log.ticks.size(), 1000u);
  const auto trials = summarize_trials(log, AnalysisParams{});
  ASSERT_EQ(trials.size(), 4u);
  for (const auto& t : trials) {
    EXPECT_TRUE(t.confirmed);
    EXPECT_GE(*t.completion_s, 3.0);
    EXPECT_TRUE(t.sparc_elbow);
  }
}

TEST_F(BundleFixture, MalformedRowIsNamed) {
  const auto d = copy("malformed");
  replace_line(d / kLogFile, 5, "0.008000,abc");
  try {
    read_bundle(d);
    FAIL();
  } catch (const MalformedLog& e) {
    EXPECT_NE(std::string(e.what()).find("log.csv row 5"), std::string::npos) << e.what();
  }
}

TEST_F(BundleFixture, NonUniformSpacingIsRejected) {
  const auto d = copy("spacing");
  std::istringstream in(slurp(d / kLogFile));
  std::string line;
  for (int i = 0; i < 7; ++i) std::getline(in, line);
  line.replace(0, line.find(','), "0.011000");  // row 7 would be 0.010000
  replace_line(d / kLogFile, 7, line);
  try {
    read_bundle(d);
    FAIL();
  } catch (const MalformedLog& e) {
    EXPECT_NE(std::string(e.what()).find("non-uniform"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("row 7"), std::string::npos) << e.what();
  }
}

TEST_F(BundleFixture, AnalyzeIsIdempotentAndReadOnly) {
  const auto in = copy("idem_in");
  const auto before_log = sha256_file(in / kLogFile);
  const auto before_events = sha256_file(in / kEventsFile);
  const auto out1 = testing::temp_dir("idem_out1");
  const auto out2 = testing::temp_dir("idem_out2");
  analyze_path(in, out1);
  analyze_path(in, out2);
  for (const char* f : {"trials.csv", "outliers.csv", "summary.json"}) {
    ASSERT_TRUE(fs::exists(out1 / f)) << f;
    EXPECT_EQ(slurp(out1 / f), slurp(out2 / f)) << f;
  }
  EXPECT_EQ(sha256_file(in / kLogFile), before_log);
  EXPECT_EQ(sha256_file(in / kEventsFile), before_events);
}

TEST_F(BundleFixture, DirectoryOfBundlesIsAggregated) {
  const auto root = testing::temp_dir("multi");
  fs::copy(*dir_, root / "a", fs::copy_options::recursive);
  fs::copy(*dir_, root / "b", fs::copy_options::recursive);
  const auto r = analyze_path(root, testing::temp_dir("multi_out"));
  EXPECT_EQ(r.sessions, 2u);
  EXPECT_EQ(r.trials.size(), 8u);
}

int sh(const std::string& cmd) {
  const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

TEST(Cli, RunThenAnalyze) {
  const auto cfg = testing::temp_dir("cli") / "c.toml";
  std::ofstream(cfg) << "seed = 5\n[session]\nmax_trials = 2\n";
  const auto out = testing::temp_dir("cli_run");
  const std::string cli = TELEOP_CLI;
  ASSERT_EQ(sh(cli + " run --config " + cfg.string() + " --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / kManifestFile));
  const auto an = testing::temp_dir("cli_an");
  ASSERT_EQ(sh(cli + " analyze --in " + out.string() + " --out " + an.string()), 0);
  EXPECT_TRUE(fs::exists(an / "summary.json"));
}

TEST(Cli, ShippedConfigRuns) {
  const auto out = testing::temp_dir("cli_shipped");
  const std::string cli = TELEOP_CLI;
  EXPECT_EQ(sh(cli + " run --config " + std::string(TELEOP_SOURCE_DIR) + "/configs/udp.toml --transport loopback --seed 3 --out " +
               out.string()),
            0);
}

TEST(Cli, BadInputsFail) {
  const std::string cli = TELEOP_CLI;
  const auto cfg = testing::temp_dir("cli_bad") / "bad.toml";
  std::ofstream(cfg) << "seed = 1\nbogus = 3\n";
  EXPECT_NE(sh(cli + " run --config " + cfg.string()), 0);
  EXPECT_NE(sh(cli + " run --config /nonexistent.toml"), 0);
  EXPECT_NE(sh(cli + " analyze --in /nonexistent --out /tmp/x"), 0);
  EXPECT_NE(sh(cli + " frobnicate"), 0);
}

}  // namespace
}  // namespace teleop
