#include "teleop/metrics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <numeric>

namespace teleop::metrics {
namespace {

// FFTW planning is not thread-safe; execution is.
std::mutex& fftw_planner_mutex() {
  static std::mutex mu;
  return mu;
}

std::vector<double> filter_pass(std::span<const double> x, const FirstOrderCoeffs& c) {
  std::vector<double> y(x.size());
  if (x.empty()) return y;
  double x_prev = x[0];
  double y_prev = x[0];
  for (std::size_t n = 0; n < x.size(); ++n) {
    y[n] = c.b0 * x[n] + c.b1 * x_prev - c.a1 * y_prev;
    x_prev = x[n];
    y_prev = y[n];
  }
  return y;
}

std::vector<double> magnitude_spectrum(std::span<const double> x, std::size_t nfft) {
  std::vector<double> in(nfft, 0.0);
  std::copy(x.begin(), x.end(), in.begin());
  const std::size_t nbins = nfft / 2 + 1;
  auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nbins));
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(nfft), in.data(), out, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::vector<double> mag(nbins);
  for (std::size_t k = 0; k < nbins; ++k) mag[k] = std::hypot(out[k][0], out[k][1]);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(out);
  return mag;
}

}  // namespace

FirstOrderCoeffs butterworth_lowpass(double fc, double fs) {
  if (!(fs > 0.0) || !(fc > 0.0) || !(fc < 0.5 * fs)) {
    throw std::invalid_argument("butterworth_lowpass: need 0 < fc < fs/2");
  }
  const double K = std::tan(std::numbers::pi * fc / fs);
  return {K / (1.0 + K), K / (1.0 + K), (K - 1.0) / (1.0 + K)};
}

std::vector<double> lowpass(std::span<const double> x, double fc, double fs, bool zero_phase) {
  const FirstOrderCoeffs c = butterworth_lowpass(fc, fs);
  std::vector<double> y = filter_pass(x, c);
  if (!zero_phase) return y;
  std::reverse(y.begin(), y.end());
  y = filter_pass(y, c);
  std::reverse(y.begin(), y.end());
  return y;
}

std::vector<double> speed_profile(const Trajectory& traj, double fc, bool zero_phase) {
  const std::size_t n = traj.samples.size();
  if (n < 3) throw std::invalid_argument("speed_profile: need at least 3 samples");
  if (!(traj.fs > 0.0)) throw std::invalid_argument("speed_profile: fs must be positive");
  const double fs = traj.fs;
  std::array<std::vector<double>, 3> vel;
  for (int a = 0; a < 3; ++a) {
    auto& v = vel[static_cast<std::size_t>(a)];
    v.resize(n);
    v[0] = (traj.samples[1][a] - traj.samples[0][a]) * fs;
    v[n - 1] = (traj.samples[n - 1][a] - traj.samples[n - 2][a]) * fs;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      v[i] = (traj.samples[i + 1][a] - traj.samples[i - 1][a]) * (0.5 * fs);
    }
    v = lowpass(v, fc, fs, zero_phase);
  }
  std::vector<double> speed(n);
  for (std::size_t i = 0; i < n; ++i) {
    speed[i] = std::sqrt(vel[0][i] * vel[0][i] + vel[1][i] * vel[1][i] + vel[2][i] * vel[2][i]);
  }
  return speed;
}

void SparcParams::validate() const {
  if (!(w_max > 0.0)) throw std::invalid_argument("SPARC w_max must be positive");
  if (!(amp_threshold > 0.0 && amp_threshold < 1.0)) {
    throw std::invalid_argument("SPARC amplitude threshold must lie in (0, 1)");
  }
  if (pad_level < 2 || pad_level > 8) throw std::invalid_argument("SPARC pad level must lie in [2, 8]");
}

SparcResult sparc_detail(std::span<const double> speeds, double fs, const SparcParams& params) {
  params.validate();
  if (speeds.empty()) throw std::invalid_argument("sparc: empty speed profile");
  if (!(fs > 0.0)) throw std::invalid_argument("sparc: fs must be positive");
  if (std::all_of(speeds.begin(), speeds.end(), [](double v) { return v == 0.0; })) {
    throw UndefinedMetric("sparc: all-zero speed profile");
  }

  std::size_t nfft = 1;
  while (nfft < speeds.size()) nfft <<= 1;
  nfft <<= params.pad_level;
  std::vector<double> mag = magnitude_spectrum(speeds, nfft);
  const double dc = mag[0];
  if (!(dc > 0.0)) throw UndefinedMetric("sparc: zero DC component");
  for (double& m : mag) m /= dc;

  const double df = fs / static_cast<double>(nfft);
  std::size_t last_in_band = 0;
  while (last_in_band + 1 < mag.size() && static_cast<double>(last_in_band + 1) * df <= params.w_max) {
    ++last_in_band;
  }
  std::size_t cutoff = 0;
  for (std::size_t k = 0; k <= last_in_band; ++k) {
    if (mag[k] >= params.amp_threshold) cutoff = k;
  }
  cutoff = std::max<std::size_t>(cutoff, 1);

  const double wc = static_cast<double>(cutoff) * df;
  double arc = 0.0;
  for (std::size_t k = 1; k <= cutoff; ++k) {
    const double dw = df / wc;
    const double dv = mag[k] - mag[k - 1];
    arc += std::sqrt(dw * dw + dv * dv);
  }
  return {-arc, wc, nfft};
}

double sparc(std::span<const double> speeds, double fs, const SparcParams& params) {
  return sparc_detail(speeds, fs, params).value;
}

std::optional<double> completion_time(const TrialRecord& trial) {
  if (!trial.confirmed_at) return std::nullopt;
  const auto us = std::llround(*trial.confirmed_at * 1e6) - std::llround(trial.shown_at * 1e6);
  return static_cast<double>(us) / 1e6;
}

double quantile_type7(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty data");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double median(std::span<const double> v) {
  if (v.empty()) return 0.0;
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  return quantile_type7(s, 0.5);
}

OutlierResult remove_outliers(std::span<const double> values, double k) {
  if (values.empty()) throw std::invalid_argument("remove_outliers: empty input");
  OutlierResult r;
  r.removed_mask.assign(values.size(), false);
  OutlierReport& rep = r.report;
  rep.n = values.size();
  rep.mean_before = mean(values);
  rep.sd_before = sample_sd(values);

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  rep.q1 = quantile_type7(sorted, 0.25);
  rep.q3 = quantile_type7(sorted, 0.75);
  const double iqr = rep.q3 - rep.q1;
  rep.lower_fence = rep.q1 - k * iqr;
  rep.upper_fence = rep.q3 + k * iqr;

  const bool screen = values.size() >= 4;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (screen && (v < rep.lower_fence || v > rep.upper_fence)) {
      r.removed.push_back(v);
      r.removed_mask[i] = true;
    } else {
      r.kept.push_back(v);
    }
  }
  rep.removed = r.removed.size();
  rep.percent_removed = 100.0 * static_cast<double>(rep.removed) / static_cast<double>(rep.n);
  rep.mean_after = mean(r.kept);
  rep.sd_after = sample_sd(r.kept);
  return r;
}

}  // namespace teleop::metrics
