#pragma once

#include "teleop/task_engine.hpp"
#include "teleop/types.hpp"

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace teleop::metrics {

// Raised when a metric is mathematically undefined for its input
// (e.g. SPARC of an all-zero speed profile).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// y[n] = b0 x[n] + b1 x[n-1] - a1 y[n-1]
struct FirstOrderCoeffs {
  double b0 = 0.0;
  double b1 = 0.0;
  double a1 = 0.0;
};

// First-order Butterworth low-pass via the bilinear transform with
// prewarping. Requires 0 < fc < fs/2.
FirstOrderCoeffs butterworth_lowpass(double fc, double fs);

// Filters x. zero_phase runs the filter forward then backward. Each pass
// starts in the steady state of its first input sample, so constants pass
// through unchanged.
std::vector<double> lowpass(std::span<const double> x, double fc, double fs, bool zero_phase = true);

struct Trajectory {
  double fs = 500.0;
  std::vector<Vec3> samples;
};

// Speed magnitude: per-axis central differences (one-sided at the ends),
// each axis low-passed at fc, then the Euclidean norm per sample.
std::vector<double> speed_profile(const Trajectory& traj, double fc = 20.0, bool zero_phase = true);

struct SparcParams {
  double w_max = 20.0;         // Hz
  double amp_threshold = 0.05; // of the DC-normalized magnitude
  int pad_level = 4;           // FFT length is 2^(ceil(log2 N) + pad_level)

  void validate() const;
};

struct SparcResult {
  double value = 0.0;
  double cutoff_hz = 0.0;
  std::size_t nfft = 0;
};

// Spectral arc length of a speed profile (negative; closer to zero is smoother).
SparcResult sparc_detail(std::span<const double> speeds, double fs, const SparcParams& params = {});
double sparc(std::span<const double> speeds, double fs, const SparcParams& params = {});

// confirmed_at - shown_at rounded to the microsecond grid; empty when the
// trial never confirmed.
std::optional<double> completion_time(const TrialRecord& trial);

// Linear-interpolation quantile (Hyndman-Fan type 7) of sorted data.
double quantile_type7(std::span<const double> sorted, double p);

struct OutlierReport {
  std::size_t n = 0;
  std::size_t removed = 0;
  double percent_removed = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double lower_fence = 0.0;
  double upper_fence = 0.0;
  double mean_before = 0.0;
  double mean_after = 0.0;
  double sd_before = 0.0;  // sample standard deviation
  double sd_after = 0.0;
};

struct OutlierResult {
  std::vector<double> kept;
  std::vector<double> removed;
  std::vector<bool> removed_mask;  // aligned with the input
  OutlierReport report;
};

// Single-pass IQR fence screen: drops v < Q1 - k*IQR or v > Q3 + k*IQR.
// Fewer than four values are returned untouched. Throws on empty input.
OutlierResult remove_outliers(std::span<const double> values, double k = 2.0);

double mean(std::span<const double> v);
double sample_sd(std::span<const double> v);
double median(std::span<const double> v);

}  // namespace teleop::metrics
