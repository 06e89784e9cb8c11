// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvimg/scene.hpp"
#include "mvimg/units.hpp"

namespace mvimg {

// Uniform closed angular grid {center - width/2 : step : center + width/2}.
struct AngleCodebook {
  double center{};
  double width{};
  double step{};
  std::vector<double> angles;

  [[nodiscard]] std::size_t size() const { return angles.size(); }
  [[nodiscard]] double front() const { return angles.front(); }
  [[nodiscard]] double back() const { return angles.back(); }
};

struct BsCodebook : AngleCodebook {
  double dwell{}; // [s]

  [[nodiscard]] double sweep_duration() const { return static_cast<double>(size()) * dwell; }
};

struct ReflectionCodebook : AngleCodebook {};

namespace detail {

// Tolerates widths that are integer multiples of the step up to rounding.
inline std::size_t grid_count(double width, double step) {
  return static_cast<std::size_t>(std::floor(width / step + 1e-9)) + 1;
}

inline AngleCodebook make_grid(double center, double width, double step) {
  if (!(step > 0.0)) {
    throw std::invalid_argument("codebook: angular step must be positive");
  }
  if (!(width >= 0.0)) {
    throw std::invalid_argument("codebook: angular width must be non-negative");
  }
  const double start = center - 0.5 * width;
  const double stop = center + 0.5 * width;
  if (!(std::abs(start) < 0.5 * kPi && std::abs(stop) < 0.5 * kPi)) {
    throw std::domain_error("codebook: angles must stay within (-pi/2, pi/2)");
  }
  AngleCodebook cb{center, width, step, {}};
  const std::size_t n = grid_count(width, step);
  cb.angles.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    cb.angles.push_back(start + static_cast<double>(k) * step);
  }
  return cb;
}

} // namespace detail

inline BsCodebook build_bs_codebook(double center, double width, double step, double dwell) {
  if (!(dwell > 0.0)) {
    throw std::invalid_argument("codebook: dwell must be positive");
  }
  BsCodebook cb;
  static_cast<AngleCodebook &>(cb) = detail::make_grid(center, width, step);
  cb.dwell = dwell;
  return cb;
}

inline ReflectionCodebook build_reflection_codebook(double center, double width, double step) {
  ReflectionCodebook cb;
  static_cast<AngleCodebook &>(cb) = detail::make_grid(center, width, step);
  return cb;
}

// Largest step <= max_step that places both interval endpoints on the grid.
inline double fit_step(double width, double max_step) {
  if (width <= 0.0) {
    return 1.0;
  }
  if (!std::isfinite(max_step)) {
    return width;
  }
  return width / std::ceil(width / max_step - 1e-12);
}

// Two-way propagation phase (4 pi / lambda)(D_i + D_o) through p = (D tan theta_i, 0).
inline double propagation_phase(double theta_i, Point2 r, double source_height, double wavelength) {
  const double px = source_height * std::tan(theta_i);
  const double d_i = source_height / std::cos(theta_i);
  const double d_o = std::hypot(r.x - px, r.y);
  return 4.0 * kPi / wavelength * (d_i + d_o);
}

inline double propagation_phase_derivative(double theta_i, Point2 r, double source_height,
                                           double wavelength) {
  if (!(std::abs(theta_i) < 0.5 * kPi)) {
    throw std::domain_error("propagation_phase_derivative: |theta_i| must be below pi/2");
  }
  if (r.y == 0.0) {
    throw std::domain_error("propagation_phase_derivative: r_y must be non-zero");
  }
  const double c = std::cos(theta_i);
  const double dx = r.x - source_height * std::tan(theta_i);
  const double bracket = std::sin(theta_i) - dx / std::sqrt(r.y * r.y + dx * dx);
  return 4.0 * kPi * source_height / (wavelength * c * c) * bracket;
}

struct BsSamplingBound {
  double bound{};          // [rad], +inf when the derivative spread vanishes
  double max_at_upper{};   // max_r dphi/dtheta at the upper sweep edge
  double min_at_lower{};   // min_r dphi/dtheta at the lower sweep edge
};

// ROI corners plus an n x n grid spanning the rectangle.
inline std::vector<Point2> roi_probe_points(const Roi &roi, std::size_t n) {
  std::vector<Point2> pts;
  for (const auto &c : roi.corners()) {
    pts.push_back(c);
  }
  if (n == 0) {
    return pts;
  }
  for (std::size_t iy = 0; iy < n; ++iy) {
    const double fy = n == 1 ? 0.5 : static_cast<double>(iy) / static_cast<double>(n - 1);
    for (std::size_t ix = 0; ix < n; ++ix) {
      const double fx = n == 1 ? 0.5 : static_cast<double>(ix) / static_cast<double>(n - 1);
      pts.push_back({roi.x_min() + fx * roi.width, roi.y_min() + fy * roi.height});
    }
  }
  return pts;
}

// Anti-aliasing limit on the BS angular step. The derivative extrema are
// taken at the two edges of the sweep, center +/- width/2.
inline BsSamplingBound bs_sampling_bound(const Scene &scene, double bs_center, double bs_width,
                                         std::size_t grid_n = 9) {
  const double upper = bs_center + 0.5 * bs_width;
  const double lower = bs_center - 0.5 * bs_width;
  const double lambda = scene.wavelength();
  double max_up = -std::numeric_limits<double>::infinity();
  double min_lo = std::numeric_limits<double>::infinity();
  for (const auto &r : roi_probe_points(scene.roi, grid_n)) {
    max_up = std::max(max_up,
                      propagation_phase_derivative(upper, r, scene.source_height, lambda));
    min_lo = std::min(min_lo,
                      propagation_phase_derivative(lower, r, scene.source_height, lambda));
  }
  const double spread = std::abs(max_up - min_lo);
  const double bound = spread > 0.0 ? kPi / spread : std::numeric_limits<double>::infinity();
  return {bound, max_up, min_lo};
}

// Half the narrowest module beamwidth over the reflection codebook.
inline double reflection_sampling_bound(const AngleCodebook &codebook, int n_mod,
                                        double element_spacing, double wavelength) {
  if (n_mod < 1) {
    throw std::invalid_argument("reflection_sampling_bound: N_mod must be >= 1");
  }
  if (codebook.angles.empty()) {
    throw std::invalid_argument("reflection_sampling_bound: empty codebook");
  }
  double widest_cos = 0.0;
  for (double a : codebook.angles) {
    widest_cos = std::max(widest_cos, std::cos(a));
  }
  return 0.5 * wavelength / (n_mod * element_spacing * widest_cos);
}

struct Periods {
  double lambda_x{};   // [m]
  double lambda_tau{}; // [s]
  int n_mod{};
  bool lambda_x_overridden{};
};

inline Periods derive_periods_and_module_size(double a_inf, std::size_t refl_size,
                                              double sweep_duration, double element_spacing,
                                              std::optional<double> lambda_x_override = {}) {
  if (refl_size == 0 || !(sweep_duration > 0.0) || !(element_spacing > 0.0)) {
    throw std::invalid_argument("derive_periods: inputs must be positive");
  }
  Periods p;
  p.lambda_x_overridden = lambda_x_override.has_value();
  p.lambda_x = lambda_x_override.value_or(2.0 * a_inf);
  if (!(p.lambda_x > 0.0)) {
    throw std::invalid_argument("derive_periods: spatial period must be positive");
  }
  p.lambda_tau = static_cast<double>(refl_size) * sweep_duration;
  const double n_mod = std::round(p.lambda_x / (2.0 * element_spacing * static_cast<double>(refl_size)));
  if (n_mod < 1.0) {
    throw std::domain_error("derive_periods: module size rounds to zero elements");
  }
  p.n_mod = static_cast<int>(n_mod);
  return p;
}

// Angular span of the ROI as seen from the two ends of the swept plane segment.
inline double roi_angular_span(const Scene &scene, double bs_center, double bs_width) {
  const double x_hi = scene.source_height * std::tan(bs_center + 0.5 * bs_width);
  const double x_lo = scene.source_height * std::tan(bs_center - 0.5 * bs_width);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double px : {x_lo, x_hi}) {
    for (const auto &c : scene.roi.corners()) {
      const double a = required_reflection_angle({px, 0.0}, c);
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
  }
  return hi - lo;
}

struct DesignInputs {
  Scene scene;
  double bs_center{};                     // [rad]
  double bs_width{};                      // [rad]
  std::optional<double> bs_step;          // [rad], auto from the bound when empty
  std::optional<double> refl_center;      // [rad], auto from the ROI center when empty
  std::optional<double> refl_width;       // [rad], auto from the ROI span when empty
  std::optional<std::size_t> refl_size;   // |Theta_o|
  std::optional<double> refl_step;        // [rad]
  std::optional<double> lambda_x;         // [m]
  double sweep_duration{0.01};            // T [s]
  std::optional<double> lambda_tau;       // [s]
  std::size_t grid_n{9};
};

struct DesignReport {
  double lambda_x{};
  double lambda_tau{};
  int n_mod{};
  double a_inf{};
  double dtheta_i_max{};
  double dtheta_o_max{};
  double dtheta_i{};
  double dtheta_o{};
  std::size_t bs_size{};
  std::size_t refl_size{};
  double refl_center{};
  double refl_width{};
  double module_length{};
  std::vector<std::string> warnings;
};

struct Design {
  BsCodebook bs;
  ReflectionCodebook refl;
  Periods periods;
  DesignReport report;
};

inline Design design_system(const DesignInputs &in) {
  const Scene &sc = in.scene;
  sc.validate();
  Design out;
  auto &rep = out.report;
  const double d = sc.element_spacing;
  const double lambda = sc.wavelength();

  rep.a_inf = asymptotic_aperture(sc.source_height, in.bs_center, in.bs_width);
  if (rep.a_inf > sc.plane_length()) {
    rep.warnings.push_back("asymptotic aperture " + std::to_string(rep.a_inf) +
                           " m exceeds plane length " + std::to_string(sc.plane_length()) + " m");
  }

  const auto bsb = bs_sampling_bound(sc, in.bs_center, in.bs_width, in.grid_n);
  rep.dtheta_i_max = bsb.bound;
  if (!std::isfinite(bsb.bound)) {
    rep.warnings.push_back("BS sampling bound is unbounded: zero derivative spread over the ROI");
  }
  const double bs_step = in.bs_step.value_or(fit_step(in.bs_width, bsb.bound));
  if (in.bs_step && bs_step > bsb.bound) {
    rep.warnings.push_back("BS angular step exceeds the anti-aliasing bound");
  }
  const auto bs_count = detail::grid_count(in.bs_width, bs_step);
  out.bs = build_bs_codebook(in.bs_center, in.bs_width, bs_step,
                             in.sweep_duration / static_cast<double>(bs_count));

  const double refl_center =
      in.refl_center.value_or(required_reflection_angle({sc.plane_offset, 0.0}, sc.roi.center));
  const double refl_width = in.refl_width.value_or(roi_angular_span(sc, in.bs_center, in.bs_width));

  auto lambda_x_for = [&](std::size_t q) {
    return derive_periods_and_module_size(rep.a_inf, q, out.bs.sweep_duration(), d, in.lambda_x);
  };

  std::size_t q = 0;
  if (in.refl_size) {
    q = *in.refl_size;
  } else if (in.refl_step) {
    q = detail::grid_count(refl_width, *in.refl_step);
  } else if (refl_width <= 0.0) {
    q = 1;
  } else {
    // smallest codebook whose step honors the module-overlap bound
    for (q = 2; q < 100000; ++q) {
      const double step = refl_width / static_cast<double>(q - 1);
      const auto per = lambda_x_for(q);
      const auto cb = build_reflection_codebook(refl_center, refl_width, step);
      if (step <= reflection_sampling_bound(cb, per.n_mod, d, lambda)) {
        break;
      }
    }
  }
  if (q == 0) {
    throw std::invalid_argument("design: reflection codebook must not be empty");
  }
  double refl_step = 1.0;
  if (in.refl_step) {
    refl_step = *in.refl_step;
  } else if (q > 1) {
    refl_step = refl_width / static_cast<double>(q - 1);
  }
  if (q == 1 && refl_width > 0.0 && !in.refl_step) {
    refl_step = 2.0 * refl_width;
  }
  out.refl = build_reflection_codebook(refl_center, q == 1 ? 0.0 : refl_width, refl_step);
  if (out.refl.size() != q) {
    throw std::logic_error("design: reflection codebook size mismatch");
  }

  out.periods = lambda_x_for(q);
  if (in.lambda_tau) {
    if (!(*in.lambda_tau > 0.0)) {
      throw std::invalid_argument("design: temporal period must be positive");
    }
    out.periods.lambda_tau = *in.lambda_tau;
  }
  if (out.periods.lambda_x_overridden &&
      std::abs(out.periods.lambda_x - 2.0 * rep.a_inf) > 1e-6 * out.periods.lambda_x) {
    rep.warnings.push_back("spatial period override " + std::to_string(out.periods.lambda_x) +
                           " m differs from 2*A_inf = " + std::to_string(2.0 * rep.a_inf) + " m");
  }

  rep.lambda_x = out.periods.lambda_x;
  rep.lambda_tau = out.periods.lambda_tau;
  rep.n_mod = out.periods.n_mod;
  rep.module_length = rep.n_mod * d;
  rep.dtheta_o_max = reflection_sampling_bound(out.refl, rep.n_mod, d, lambda);
  rep.dtheta_i = out.bs.step;
  rep.dtheta_o = out.refl.size() > 1 ? out.refl.step : 0.0;
  rep.bs_size = out.bs.size();
  rep.refl_size = out.refl.size();
  rep.refl_center = out.refl.center;
  rep.refl_width = out.refl.width;
  if (rep.dtheta_o > rep.dtheta_o_max * (1.0 + 1e-12)) {
    rep.warnings.push_back("reflection angular step exceeds the module-overlap bound");
  }
  return out;
}

} // namespace mvimg
