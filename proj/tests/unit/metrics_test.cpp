#include "metrics_support.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>

namespace teleop::metrics {
namespace {

TEST(Butterworth, BilinearCoefficients) {
  const double K = std::tan(std::numbers::pi * 20.0 / 500.0);
  const auto c = butterworth_lowpass(20.0, 500.0);
  EXPECT_NEAR(c.b0, K / (1 + K), 1e-9);
  EXPECT_NEAR(c.b1, K / (1 + K), 1e-9);
  EXPECT_NEAR(c.a1, (K - 1) / (1 + K), 1e-9);
  EXPECT_NEAR(c.b0, 0.11216, 1e-5);
  EXPECT_NEAR(c.a1, -0.77568, 1e-5);
  EXPECT_THROW(butterworth_lowpass(250.0, 500.0), std::invalid_argument);
  EXPECT_THROW(butterworth_lowpass(0.0, 500.0), std::invalid_argument);
}

TEST(Butterworth, ConstantPassesUnchanged) {
  const std::vector<double> x(1000, 3.7);
  for (bool zp : {true, false}) {
    for (double y : lowpass(x, 20.0, 500.0, zp)) EXPECT_NEAR(y, 3.7, 3.7e-9);
  }
}

TEST(Butterworth, HalfAmplitudeAtCutoffZeroPhase) {
  const double fs = 500.0;
  std::vector<double> x(5000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2 * std::numbers::pi * 20.0 * static_cast<double>(i) / fs);
  const auto y = lowpass(x, 20.0, fs, true);
  // Amplitude in the middle, away from the edge transients.
  double peak = 0.0;
  for (std::size_t i = 2000; i < 3000; ++i) peak = std::max(peak, std::abs(y[i]));
  EXPECT_NEAR(peak, 0.50, 0.01);
}

TEST(Butterworth, Linearity) {
  Xoshiro256 rng(81);
  std::vector<double> x(800), y(800), z(800);
  const double a = 1.7, b = -0.4;
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.uniform(-1, 1);
    y[i] = rng.uniform(-1, 1);
    z[i] = a * x[i] + b * y[i];
  }
  const auto fx = lowpass(x, 20.0, 500.0), fy = lowpass(y, 20.0, 500.0), fz = lowpass(z, 20.0, 500.0);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(fz[i], a * fx[i] + b * fy[i], 1e-9);
}

TEST(SpeedProfile, Stationary) {
  Trajectory t;
  t.samples.assign(100, Vec3(0.1, 0.2, 0.3));
  for (double v : speed_profile(t)) EXPECT_EQ(v, 0.0);
}

TEST(SpeedProfile, UniformLine) {
  Trajectory t;
  for (int i = 0; i < 500; ++i) t.samples.push_back(Vec3(0.1 * i / 500.0, 0.0, 0.0));
  const auto v = speed_profile(t);
  for (std::size_t i = 1; i + 1 < v.size(); ++i) EXPECT_NEAR(v[i], 0.1, 1e-6);
}

TEST(SpeedProfile, MinJerkPeak) {
  Trajectory t;
  for (int i = 0; i <= 500; ++i) {
    const double s = i / 500.0;
    t.samples.push_back(Vec3(0.3 * s * s * s * (10 - 15 * s + 6 * s * s), 0, 0));
  }
  const auto v = speed_profile(t);
  EXPECT_NEAR(*std::max_element(v.begin(), v.end()), 0.5625, 0.02 * 0.5625);
}

TEST(Sparc, MinJerkReachMatchesOracle) {
  const auto v = testing::min_jerk_speed(0.3, 1.0, 500.0);
  const double oracle = testing::sparc_oracle(v, 500.0);
  EXPECT_NEAR(sparc(v, 500.0), oracle, 0.05);
  EXPECT_LT(oracle, -1.3);
  EXPECT_GT(oracle, -1.8);
}

TEST(Sparc, AmplitudeInvariance) {
  auto v = testing::submovements(2, 0.4, 500.0);
  const double base = sparc(v, 500.0);
  for (double& x : v) x *= 2.0;
  EXPECT_EQ(sparc(v, 500.0), base);
}

TEST(Sparc, TimeReversalInvariance) {
  Xoshiro256 rng(82);
  auto v = testing::submovements(3, 0.3, 500.0);
  for (double& x : v) x *= 1.0 + 0.2 * rng.uniform();
  const double forward = sparc(v, 500.0);
  std::reverse(v.begin(), v.end());
  EXPECT_NEAR(sparc(v, 500.0), forward, 1e-9);
}

TEST(Sparc, SubmovementMonotonicity) {
  double prev = 0.0, prev_oracle = 0.0;
  for (int k = 1; k <= 4; ++k) {
    const auto v = testing::submovements(k, 0.4, 500.0);
    const double s = sparc(v, 500.0);
    const double o = testing::sparc_oracle(v, 500.0);
    if (k > 1) {
      EXPECT_LT(s, prev) << k << " submovements";
      EXPECT_LT(o, prev_oracle) << k << " submovements";
    }
    prev = s;
    prev_oracle = o;
  }
}

TEST(Sparc, UndefinedForZeroProfile) {
  const std::vector<double> v(100, 0.0);
  EXPECT_THROW(sparc(v, 500.0), UndefinedMetric);
}

TEST(Sparc, PadsFourLevelsBeyondNextPowerOfTwo) {
  const auto v = testing::min_jerk_speed(0.3, 1.0, 500.0);
  const auto d = sparc_detail(v, 500.0);
  EXPECT_EQ(d.nfft, 8192u);
  EXPECT_GT(d.cutoff_hz, 0.0);
  EXPECT_LE(d.cutoff_hz, 20.0);
}

TEST(Quantile, Type7) {
  const std::vector<double> s = {1, 2, 3, 4, 100};
  EXPECT_EQ(quantile_type7(s, 0.25), 2.0);
  EXPECT_EQ(quantile_type7(s, 0.75), 4.0);
  const std::vector<double> t = {1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(quantile_type7(t, 0.25), 1.75);
}

TEST(Outliers, ScreensLargeValue) {
  const std::vector<double> v = {1, 2, 3, 4, 100};
  const auto r = remove_outliers(v, 2.0);
  EXPECT_EQ(r.kept, (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(r.removed, (std::vector<double>{100}));
  EXPECT_EQ(r.report.q1, 2.0);
  EXPECT_EQ(r.report.q3, 4.0);
  EXPECT_EQ(r.report.lower_fence, -2.0);
  EXPECT_EQ(r.report.upper_fence, 8.0);
  EXPECT_EQ(r.report.n, 5u);
  EXPECT_EQ(r.report.removed, 1u);
  EXPECT_DOUBLE_EQ(r.report.percent_removed, 20.0);
  EXPECT_DOUBLE_EQ(r.report.mean_before, 22.0);
  EXPECT_DOUBLE_EQ(r.report.mean_after, 2.5);
  EXPECT_NEAR(r.report.sd_after, std::sqrt(5.0 / 3.0), 1e-12);
}

TEST(Outliers, AllEqualKeepsEverything) {
  const std::vector<double> v(8, 4.2);
  const auto r = remove_outliers(v);
  EXPECT_EQ(r.kept.size(), 8u);
  EXPECT_TRUE(r.removed.empty());
}

TEST(Outliers, SmallSampleUntouched) {
  const std::vector<double> v = {1, 2, 1000};
  EXPECT_EQ(remove_outliers(v).kept.size(), 3u);
  EXPECT_THROW(remove_outliers(std::vector<double>{}), std::invalid_argument);
}

TEST(Outliers, PartitionPreservesOrder) {
  Xoshiro256 rng(83);
  for (int n = 0; n < 200; ++n) {
    std::vector<double> v(4 + rng.below(40));
    for (double& x : v) x = rng.normal() * (rng.uniform() < 0.1 ? 20.0 : 1.0);
    const auto r = remove_outliers(v);
    ASSERT_EQ(r.kept.size() + r.removed.size(), v.size());
    std::size_t ki = 0, ri = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (r.removed_mask[i]) {
        ASSERT_EQ(r.removed[ri++], v[i]);
        EXPECT_TRUE(v[i] < r.report.lower_fence || v[i] > r.report.upper_fence);
      } else {
        ASSERT_EQ(r.kept[ki++], v[i]);
        EXPECT_TRUE(v[i] >= r.report.lower_fence && v[i] <= r.report.upper_fence);
      }
    }
  }
}

TEST(Summary, MeanMedianSd) {
  const std::vector<double> v = {2, 4, 4, 4, 5, 5, 7, 9};
  EXPECT_DOUBLE_EQ(mean(v), 5.0);
  EXPECT_DOUBLE_EQ(median(v), 4.5);
  EXPECT_NEAR(sample_sd(v), std::sqrt(32.0 / 7.0), 1e-12);
}

}  // namespace
}  // namespace teleop::metrics
