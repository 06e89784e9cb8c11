// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvimg/metasurface.hpp"
#include "mvimg/parallel.hpp"
#include "mvimg/scene.hpp"
#include "mvimg/schedule.hpp"
#include "mvimg/units.hpp"
#include "mvimg/views.hpp"

namespace mvimg {

// Matched-filtered pulse: unit-peak sinc of bandwidth B.
inline double matched_pulse(double dt, double bandwidth) {
  const double x = kPi * bandwidth * dt;
  if (std::abs(x) < 1e-8) {
    return 1.0 - x * x / 6.0;
  }
  return std::sin(x) / x;
}

// Two-way free-space amplitude Gamma (lambda/4 pi D_i)^2 (lambda/4 pi D_o)^2.
inline cdouble path_amplitude(cdouble reflectivity, double d_i, double d_o, double wavelength) {
  const double gi = wavelength / (4.0 * kPi * d_i);
  const double go = wavelength / (4.0 * kPi * d_o);
  return reflectivity * (gi * gi) * (go * go);
}

// Per-snapshot state shared by the forward model and back-projection: beam
// center, illuminated elements and the per-element factors
// exp(j phi_m) exp(-j k u_m sin theta_i), with u_m = x_m - p_x.
struct SnapshotGeometry {
  Snapshot snap;
  Point2 p;
  double d_i{};
  IndexRange lit;
  double u0{};      // offset of the first illuminated element from p [m]
  double k{};       // wavenumber [rad/m]
  double spacing{}; // element spacing [m]
  std::vector<cdouble> coeffs;

  // S = sum_m exp(j phi_m) exp(-j k u_m (sin theta_i - s)), s = sin theta_o.
  [[nodiscard]] cdouble plane_response(double s) const {
    if (coeffs.empty()) {
      return {};
    }
    const cdouble w = std::polar(1.0, k * spacing * s);
    cdouble acc = coeffs.back();
    for (std::size_t m = coeffs.size() - 1; m-- > 0;) {
      acc = acc * w + coeffs[m];
    }
    return acc * std::polar(1.0, k * u0 * s);
  }
};

inline SnapshotGeometry prepare_snapshot(const Scene &scene, const PhasePlan &plan,
                                         const Snapshot &snap) {
  SnapshotGeometry g;
  g.snap = snap;
  g.p = incidence_point(snap.theta_i, scene);
  g.d_i = distance(g.p, scene.source());
  g.lit = illuminated_set(snap.theta_i, scene.bs_beamwidth(snap.theta_i), scene);
  g.k = scene.wavenumber();
  g.spacing = scene.element_spacing;
  if (g.lit.empty()) {
    return g;
  }
  g.u0 = scene.element_x(g.lit.begin) - g.p.x;
  const auto phases = plan.phases(g.lit, snap.tau_in_sweep, snap.sweep);
  const double sin_i = std::sin(snap.theta_i);
  g.coeffs.reserve(phases.size());
  for (std::size_t m = 0; m < phases.size(); ++m) {
    const double u = scene.element_x(g.lit.begin + m) - g.p.x;
    g.coeffs.push_back(std::polar(1.0, phases[m] - g.k * u * sin_i));
  }
  return g;
}

struct Contribution {
  cdouble amplitude;
  double delay{}; // [s]
};

// Echo of each target for one snapshot. Entries stay aligned with `targets`;
// a target gated out of every reflected beam gets a zero amplitude.
inline std::vector<Contribution> snapshot_echo(const SnapshotGeometry &g,
                                               std::span<const Target> targets,
                                               const Scene &scene, double tx_scale = 1.0,
                                               const PhasePlan *gate_plan = nullptr) {
  std::vector<Contribution> out;
  out.reserve(targets.size());
  const double lambda = scene.wavelength();
  for (const auto &t : targets) {
    const double d_o = distance(t.position, g.p);
    const double path = g.d_i + d_o;
    Contribution c{{}, 2.0 * path / kSpeedOfLight};
    const bool gated =
        gate_plan != nullptr && !in_reflected_beam(scene, *gate_plan, g.snap, g.lit, t.position);
    if (!g.lit.empty() && !gated) {
      const double s = std::sin(required_reflection_angle(g.p, t.position));
      const cdouble resp = g.plane_response(s);
      c.amplitude = tx_scale * path_amplitude(t.reflectivity, g.d_i, d_o, lambda) *
                    std::polar(1.0, -2.0 * g.k * path) * resp * resp;
    }
    out.push_back(c);
  }
  return out;
}

enum class EchoMode { analytic, sampled };

struct EchoCube {
  EchoMode mode{EchoMode::analytic};
  std::size_t sweeps{};
  std::size_t per_sweep{};
  std::size_t target_count{};
  double bandwidth{};
  double noise_power{}; // [W]
  std::uint64_t seed{};
  // analytic: [snapshot][target]
  std::vector<Contribution> analytic;
  // sampled: [snapshot][sample] on t0 + n / sample_rate
  double sample_rate{};
  double t0{};
  std::size_t samples_per_snapshot{};
  std::vector<cdouble> samples;

  [[nodiscard]] std::size_t snapshot_count() const { return sweeps * per_sweep; }

  // y(t, tau) for flat snapshot index `snap`. Sampled cubes interpolate
  // linearly and report queries outside the window.
  [[nodiscard]] cdouble evaluate(std::size_t snap, double t, bool &in_window) const {
    in_window = true;
    if (mode == EchoMode::analytic) {
      cdouble acc{};
      const auto *row = analytic.data() + snap * target_count;
      for (std::size_t j = 0; j < target_count; ++j) {
        acc += row[j].amplitude * matched_pulse(t - row[j].delay, bandwidth);
      }
      return acc;
    }
    const double pos = (t - t0) * sample_rate;
    const auto last = static_cast<double>(samples_per_snapshot) - 1.0;
    if (!(pos >= 0.0 && pos <= last)) {
      in_window = false;
      return {};
    }
    auto i0 = static_cast<std::size_t>(pos);
    if (i0 + 1 >= samples_per_snapshot) {
      i0 = samples_per_snapshot >= 2 ? samples_per_snapshot - 2 : 0;
    }
    const double w = pos - static_cast<double>(i0);
    const auto *row = samples.data() + snap * samples_per_snapshot;
    if (samples_per_snapshot == 1) {
      return row[0];
    }
    return (1.0 - w) * row[i0] + w * row[i0 + 1];
  }

  [[nodiscard]] EchoCube sweep_slice(std::size_t sweep) const {
    if (sweep >= sweeps) {
      throw std::out_of_range("EchoCube: sweep index out of range");
    }
    EchoCube out = *this;
    out.sweeps = 1;
    if (mode == EchoMode::analytic) {
      const auto first = analytic.begin() +
                         static_cast<std::ptrdiff_t>(sweep * per_sweep * target_count);
      out.analytic.assign(first, first + static_cast<std::ptrdiff_t>(per_sweep * target_count));
    } else {
      const auto first = samples.begin() +
                         static_cast<std::ptrdiff_t>(sweep * per_sweep * samples_per_snapshot);
      out.samples.assign(first,
                         first + static_cast<std::ptrdiff_t>(per_sweep * samples_per_snapshot));
    }
    return out;
  }
};

// Counter-based normal generator: the draw depends only on the key, never on
// call order or thread assignment.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Circular complex Gaussian with E|n|^2 = power.
inline cdouble keyed_complex_noise(std::uint64_t seed, std::uint64_t sweep, std::uint64_t snapshot,
                                   std::uint64_t sample, double power) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ sweep);
  h = splitmix64(h ^ (snapshot + 0x632BE59BD9B4E019ULL));
  h = splitmix64(h ^ (sample + 0x8CB92BA72F3D8DD7ULL));
  const std::uint64_t h2 = splitmix64(h);
  const double u1 = (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53; // (0, 1]
  const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;        // [0, 1)
  const double radius = std::sqrt(-std::log(u1) * power);
  return std::polar(radius, kTwoPi * u2);
}

struct AcquisitionOptions {
  EchoMode mode{EchoMode::analytic};
  double oversample{8.0};
  double noise_power{0.0}; // [W]
  std::uint64_t seed{1};
  bool beam_gating{false};
  double tx_scale{1.0};
  unsigned threads{1};
};

struct AcquisitionReport {
  std::vector<std::string> warnings;
  double max_residual_delay{}; // M d max(sin theta_i, sin theta_o) / c [s]
  double peak_power{};         // max |y|^2 of the noiseless echo [W]
  double snr_db{std::numeric_limits<double>::infinity()};
};

struct DelayWindow {
  double t_min{};
  double t_max{};
};

// Round-trip delays reachable from the ROI over the whole schedule, padded
// by 4/B on both sides.
inline DelayWindow roi_delay_window(const Scene &scene, const SweepSchedule &schedule) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const Roi &roi = scene.roi;
  for (const auto &snap : schedule.snapshots) {
    const Point2 p = incidence_point(snap.theta_i, scene);
    const double d_i = distance(p, scene.source());
    // nearest ROI point to p, plus the corners for the far side
    const Point2 near{std::clamp(p.x, roi.x_min(), roi.x_max()),
                      std::clamp(p.y, roi.y_min(), roi.y_max())};
    lo = std::min(lo, d_i + distance(near, p));
    for (const auto &c : roi.corners()) {
      hi = std::max(hi, d_i + distance(c, p));
    }
  }
  const double guard = 4.0 / scene.bandwidth_hz;
  return {2.0 * lo / kSpeedOfLight - guard, 2.0 * hi / kSpeedOfLight + guard};
}

inline EchoCube simulate_acquisition(const Scene &scene, const SweepSchedule &schedule,
                                     const PhasePlan &plan, std::span<const Target> targets,
                                     const AcquisitionOptions &opt,
                                     AcquisitionReport *report = nullptr) {
  scene.validate();
  if (schedule.snapshots.empty()) {
    throw std::invalid_argument("simulate_acquisition: empty schedule");
  }
  if (opt.mode == EchoMode::sampled && !(opt.oversample >= 1.0)) {
    throw std::invalid_argument("simulate_acquisition: oversample factor must be >= 1");
  }
  if (opt.noise_power < 0.0) {
    throw std::invalid_argument("simulate_acquisition: noise power must be non-negative");
  }
  if (opt.noise_power > 0.0 && opt.mode == EchoMode::analytic) {
    throw std::invalid_argument("simulate_acquisition: noise requires the sampled mode");
  }
  for (const auto &t : targets) {
    if (!scene.roi.contains(t.position)) {
      throw std::invalid_argument("simulate_acquisition: target outside the ROI");
    }
  }

  EchoCube cube;
  cube.mode = opt.mode;
  cube.sweeps = schedule.sweeps;
  cube.per_sweep = schedule.per_sweep;
  cube.target_count = targets.size();
  cube.bandwidth = scene.bandwidth_hz;
  cube.noise_power = opt.noise_power;
  cube.seed = opt.seed;

  const std::size_t n_snap = schedule.size();
  if (opt.mode == EchoMode::sampled) {
    const auto win = roi_delay_window(scene, schedule);
    cube.sample_rate = opt.oversample * scene.bandwidth_hz;
    cube.t0 = win.t_min;
    cube.samples_per_snapshot =
        static_cast<std::size_t>(std::ceil((win.t_max - win.t_min) * cube.sample_rate)) + 1;
    cube.samples.assign(n_snap * cube.samples_per_snapshot, cdouble{});
  }
  cube.analytic.assign(n_snap * targets.size(), Contribution{});

  std::vector<double> residual(n_snap, 0.0);
  std::vector<double> peak(n_snap, 0.0);
  const PhasePlan *gate = opt.beam_gating ? &plan : nullptr;

  parallel_for(n_snap, opt.threads, [&](std::size_t i) {
    const auto &snap = schedule.snapshots[i];
    const auto g = prepare_snapshot(scene, plan, snap);
    const auto contrib = snapshot_echo(g, targets, scene, opt.tx_scale, gate);
    std::copy(contrib.begin(), contrib.end(),
              cube.analytic.begin() + static_cast<std::ptrdiff_t>(i * targets.size()));

    const double sin_i = std::abs(std::sin(snap.theta_i));
    for (const auto &t : targets) {
      const double sin_o = std::abs(std::sin(required_reflection_angle(g.p, t.position)));
      residual[i] = std::max(residual[i], static_cast<double>(g.lit.size()) * scene.element_spacing *
                                              std::max(sin_i, sin_o) / kSpeedOfLight);
    }
    if (opt.mode == EchoMode::analytic) {
      for (const auto &c : contrib) {
        peak[i] = std::max(peak[i], std::norm(c.amplitude));
      }
      return;
    }
    cdouble *row = cube.samples.data() + i * cube.samples_per_snapshot;
    for (std::size_t n = 0; n < cube.samples_per_snapshot; ++n) {
      const double t = cube.t0 + static_cast<double>(n) / cube.sample_rate;
      cdouble acc{};
      for (const auto &c : contrib) {
        acc += c.amplitude * matched_pulse(t - c.delay, scene.bandwidth_hz);
      }
      peak[i] = std::max(peak[i], std::norm(acc));
      if (opt.noise_power > 0.0) {
        acc += keyed_complex_noise(opt.seed, snap.sweep, snap.index, n, opt.noise_power);
      }
      row[n] = acc;
    }
  });

  if (report != nullptr) {
    report->max_residual_delay = *std::max_element(residual.begin(), residual.end());
    report->peak_power = *std::max_element(peak.begin(), peak.end());
    if (opt.noise_power > 0.0) {
      report->snr_db = 10.0 * std::log10(report->peak_power / opt.noise_power);
    }
    if (report->max_residual_delay > 0.1 / scene.bandwidth_hz) {
      report->warnings.push_back(
          "spatial narrowband condition marginal: residual delay " +
          std::to_string(report->max_residual_delay * 1e9) + " ns exceeds 0.1/B = " +
          std::to_string(0.1 / scene.bandwidth_hz * 1e9) + " ns");
    }
  }
  return cube;
}

} // namespace mvimg
