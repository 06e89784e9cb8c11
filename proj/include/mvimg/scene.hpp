// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvimg/units.hpp"

// Geometry of the source, the reflection plane along y = 0 and the region of
// interest (ROI) below it. The source sits at (0, D); the ROI at y < 0.
// Reflection angles are measured from the plane normal pointing toward -y,
// positive toward +x.

namespace mvimg {

struct Point2 {
  double x{};
  double y{};
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Roi {
  Point2 center;
  double width{};  // along x [m]
  double height{}; // along y [m]

  [[nodiscard]] double x_min() const { return center.x - 0.5 * width; }
  [[nodiscard]] double x_max() const { return center.x + 0.5 * width; }
  [[nodiscard]] double y_min() const { return center.y - 0.5 * height; }
  [[nodiscard]] double y_max() const { return center.y + 0.5 * height; }

  [[nodiscard]] std::array<Point2, 4> corners() const {
    return {Point2{x_min(), y_min()}, Point2{x_max(), y_min()}, Point2{x_min(), y_max()},
            Point2{x_max(), y_max()}};
  }

  [[nodiscard]] bool contains(Point2 p, double tol = 1e-9) const {
    return p.x >= x_min() - tol && p.x <= x_max() + tol && p.y >= y_min() - tol &&
           p.y <= y_max() + tol;
  }
};

struct Target {
  Point2 position;
  cdouble reflectivity{1.0, 0.0};
};

struct Scene {
  double source_height{5.0};     // D [m]
  int element_count{300};        // N, even
  double element_spacing{};      // d [m]
  double plane_offset{};         // x0 [m]
  Roi roi;
  double carrier_hz{28e9};       // f0
  double bandwidth_hz{400e6};    // B
  double bs_aperture{};          // A = K d [m]

  [[nodiscard]] double wavelength() const { return kSpeedOfLight / carrier_hz; }
  [[nodiscard]] double wavenumber() const { return kTwoPi / wavelength(); }
  [[nodiscard]] Point2 source() const { return {0.0, source_height}; }

  // Array index i in [0, N) maps to element n = i - N/2 + 1.
  [[nodiscard]] double element_x(std::size_t i) const {
    const double n = static_cast<double>(i) - static_cast<double>(element_count / 2) + 1.0;
    return plane_offset + n * element_spacing;
  }
  [[nodiscard]] double plane_x_min() const { return element_x(0); }
  [[nodiscard]] double plane_x_max() const {
    return element_x(static_cast<std::size_t>(element_count) - 1);
  }
  [[nodiscard]] double plane_length() const { return element_count * element_spacing; }

  // Two-way BS beamwidth lambda / (A cos theta_i) [rad].
  [[nodiscard]] double bs_beamwidth(double theta_i) const {
    return wavelength() / (bs_aperture * std::cos(theta_i));
  }

  void validate() const {
    auto fail = [](const std::string &what) { throw std::invalid_argument("scene: " + what); };
    if (!(source_height > 0.0)) fail("source height must be positive");
    if (element_count <= 0 || element_count % 2 != 0) fail("element count must be positive and even");
    if (!(element_spacing > 0.0)) fail("element spacing must be positive");
    if (!(carrier_hz > 0.0)) fail("carrier frequency must be positive");
    if (!(bandwidth_hz > 0.0)) fail("bandwidth must be positive");
    if (!(bs_aperture > 0.0)) fail("BS aperture must be positive");
    if (roi.width < 0.0 || roi.height < 0.0) fail("ROI extents must be non-negative");
    if (!(roi.y_max() < 0.0)) fail("ROI must lie strictly below the plane (y < 0)");
  }
};

// p(tau) = (D tan theta_i, 0).
inline Point2 incidence_point(double theta_i, const Scene &scene) {
  if (!(std::abs(theta_i) < 0.5 * kPi) || std::abs(std::cos(theta_i)) < 1e-12) {
    throw std::domain_error("incidence_point: |theta_i| must be below pi/2");
  }
  return {scene.source_height * std::tan(theta_i), 0.0};
}

// Reflection angle at p that points at r. The ROI is below the plane, so
// |r_y| is used in the denominator.
inline double required_reflection_angle(Point2 p, Point2 r) {
  if (r.y == 0.0) {
    throw std::domain_error("required_reflection_angle: target on the plane (r_y = 0)");
  }
  return std::atan((r.x - p.x) / std::abs(r.y));
}

// Half-open range of array indices.
struct IndexRange {
  std::size_t begin{};
  std::size_t end{};

  [[nodiscard]] std::size_t size() const { return end - begin; }
  [[nodiscard]] bool empty() const { return end <= begin; }
  [[nodiscard]] bool contains(std::size_t i) const { return i >= begin && i < end; }
};

struct Footprint {
  double x_lo{};
  double x_hi{};
};

inline Footprint beam_footprint(double theta_i, double beamwidth, double source_height) {
  const double lo = theta_i - 0.5 * beamwidth;
  const double hi = theta_i + 0.5 * beamwidth;
  if (!(std::abs(lo) < 0.5 * kPi && std::abs(hi) < 0.5 * kPi)) {
    throw std::domain_error("beam_footprint: beam edge reaches the plane horizon");
  }
  return {source_height * std::tan(lo), source_height * std::tan(hi)};
}

// Elements whose centers fall inside the exact tangent-interval footprint.
// A footprint narrower than one element degenerates to the element nearest
// the beam center, provided the beam lands on the plane.
inline IndexRange illuminated_set(double theta_i, double beamwidth, const Scene &scene) {
  const auto fp = beam_footprint(theta_i, beamwidth, scene.source_height);
  const double d = scene.element_spacing;
  const auto n = static_cast<std::ptrdiff_t>(scene.element_count);
  const double x_first = scene.plane_x_min();
  // indices i with x_first + i d in [x_lo, x_hi]
  const double eps = 1e-9;
  auto lo = static_cast<std::ptrdiff_t>(std::ceil((fp.x_lo - x_first) / d - eps));
  auto hi = static_cast<std::ptrdiff_t>(std::floor((fp.x_hi - x_first) / d + eps));
  lo = std::max<std::ptrdiff_t>(lo, 0);
  hi = std::min<std::ptrdiff_t>(hi, n - 1);
  if (lo <= hi) {
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi + 1)};
  }
  const double center = scene.source_height * std::tan(theta_i);
  if (center < x_first - 0.5 * d || center > scene.plane_x_max() + 0.5 * d) {
    return {};
  }
  const auto nearest = std::clamp<std::ptrdiff_t>(
      static_cast<std::ptrdiff_t>(std::llround((center - x_first) / d)), 0, n - 1);
  return {static_cast<std::size_t>(nearest), static_cast<std::size_t>(nearest + 1)};
}

// Closed-form element-count estimate D theta_BW / (d sin theta_i cos theta_i).
// Singular at broadside; reported only, never used for gating.
inline double illuminated_count_estimate(double theta_i, double beamwidth, const Scene &scene) {
  const double denom = scene.element_spacing * std::sin(theta_i) * std::cos(theta_i);
  if (denom == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return std::abs(scene.source_height * beamwidth / denom);
}

// Plane extent illuminated by a full sweep over [center - width/2, center + width/2].
inline double asymptotic_aperture(double source_height, double center, double width) {
  const double hi = center + 0.5 * width;
  const double lo = center - 0.5 * width;
  if (!(std::abs(hi) < 0.5 * kPi && std::abs(lo) < 0.5 * kPi)) {
    throw std::domain_error("asymptotic_aperture: sweep reaches the plane horizon");
  }
  return source_height * (std::tan(hi) - std::tan(lo));
}

// Midpoint of the plane segment covered by the sweep.
inline double aperture_center(double source_height, double center, double width) {
  return 0.5 * source_height * (std::tan(center + 0.5 * width) + std::tan(center - 0.5 * width));
}

} // namespace mvimg
