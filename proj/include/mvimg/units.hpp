// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <numbers>

namespace mvimg {

using cdouble = std::complex<double>;

inline constexpr double kSpeedOfLight = 299792458.0; // [m/s]
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

// [W]
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

inline double wrap_two_pi(double phase) {
  double r = std::fmod(phase, kTwoPi);
  if (r < 0.0) {
    r += kTwoPi;
  }
  // fmod can return exactly 2*pi after the correction for tiny negatives
  // "+ 0.0" folds a negative zero into +0
  return r >= kTwoPi ? 0.0 : r + 0.0;
}

} // namespace mvimg
