// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "mvimg/metasurface.hpp"
#include "mvimg/scene.hpp"
#include "mvimg/schedule.hpp"

namespace mvimg {

// True when r falls inside the reflected beam of at least one illuminated
// module. Each module contributes the patch it shares with the footprint;
// the patch reflects the ray arriving at its center and its beamwidth is
// lambda / (patch length * cos theta_refl).
inline bool in_reflected_beam(const Scene &scene, const PhasePlan &plan, const Snapshot &snap,
                              IndexRange lit, Point2 r) {
  if (lit.empty()) {
    return false;
  }
  const double lambda = scene.wavelength();
  const double d = scene.element_spacing;
  const std::size_t m_first = plan.module_of(lit.begin);
  const std::size_t m_last = plan.module_of(lit.end - 1);
  for (std::size_t m = m_first; m <= m_last; ++m) {
    const auto mod = plan.module_elements(m);
    const std::size_t a = std::max(mod.begin, lit.begin);
    const std::size_t b = std::min(mod.end, lit.end);
    if (a >= b) {
      continue;
    }
    const double xc = 0.5 * (scene.element_x(a) + scene.element_x(b - 1));
    const double theta_in = std::atan(xc / scene.source_height);
    const double diff = plan.module_difference(m, snap.tau_in_sweep, snap.sweep);
    const double grad = std::sin(plan.law().bs_center) - std::sin(plan.law().bs_center + diff);
    const double s_refl = std::sin(theta_in) - grad;
    if (std::abs(s_refl) >= 1.0) {
      continue;
    }
    const double theta_refl = std::asin(s_refl);
    const double patch = static_cast<double>(b - a) * d;
    const double half_bw = 0.5 * lambda / (patch * std::cos(theta_refl));
    const double theta_t = required_reflection_angle({xc, 0.0}, r);
    if (std::abs(theta_t - theta_refl) <= half_bw) {
      return true;
    }
  }
  return false;
}

// Number of distinct views of r: each maximal run of consecutive snapshots
// (within one sweep) that keep r inside a reflected beam counts as one root
// of theta_o(tau) = theta_o(theta_i | s, r).
inline std::size_t view_count(Point2 r, const SweepSchedule &schedule, const PhasePlan &plan,
                              const Scene &scene) {
  std::size_t views = 0;
  bool prev = false;
  std::size_t prev_sweep = static_cast<std::size_t>(-1);
  for (const auto &snap : schedule.snapshots) {
    if (snap.sweep != prev_sweep) {
      prev = false;
      prev_sweep = snap.sweep;
    }
    const auto lit = illuminated_set(snap.theta_i, scene.bs_beamwidth(snap.theta_i), scene);
    const bool hit = in_reflected_beam(scene, plan, snap, lit, r);
    if (hit && !prev) {
      ++views;
    }
    prev = hit;
  }
  return views;
}

} // namespace mvimg
