#pragma once

#include "teleop/metrics.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace teleop::testing {

// SPARC reference: direct DFT on a 16x zero-padded grid, normalized by the
// DC magnitude, adaptive cutoff at the last in-band bin above threshold,
// arc length summed over straight segments.
inline double sparc_oracle(const std::vector<double>& v, double fs, double w_max = 20.0, double threshold = 0.05) {
  const std::size_t n = v.size();
  const std::size_t nfft = 16 * n;
  const double df = fs / static_cast<double>(nfft);
  const auto bins = static_cast<std::size_t>(std::floor(w_max / df + 1e-9));
  std::vector<double> mag(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k) {
    std::complex<double> acc = 0.0;
    const double w = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(nfft);
    for (std::size_t i = 0; i < n; ++i) acc += v[i] * std::polar(1.0, w * static_cast<double>(i));
    mag[k] = std::abs(acc);
  }
  const double dc = mag[0];
  for (double& m : mag) m /= dc;
  std::size_t cut = 1;
  for (std::size_t k = 0; k <= bins; ++k) {
    if (mag[k] >= threshold) cut = std::max<std::size_t>(k, 1);
  }
  const double wc = static_cast<double>(cut) * df;
  double arc = 0.0;
  for (std::size_t k = 1; k <= cut; ++k) arc += std::hypot(df / wc, mag[k] - mag[k - 1]);
  return -arc;
}

// Speed of a min-jerk reach of `distance` over T, sampled at fs.
inline std::vector<double> min_jerk_speed(double distance, double T, double fs) {
  const auto n = static_cast<std::size_t>(std::llround(T * fs)) + 1;
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) / fs / T;
    v[i] = distance / T * (30 * s * s - 60 * s * s * s + 30 * s * s * s * s);
  }
  return v;
}

// k min-jerk submovements of 1 s each separated by `pause` seconds at rest.
inline std::vector<double> submovements(int k, double pause, double fs) {
  std::vector<double> out;
  const auto one = min_jerk_speed(0.2, 1.0, fs);
  for (int i = 0; i < k; ++i) {
    if (i > 0) out.insert(out.end(), static_cast<std::size_t>(std::llround(pause * fs)), 0.0);
    out.insert(out.end(), one.begin(), one.end());
  }
  return out;
}

}  // namespace teleop::testing
