// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "mvimg/design.hpp"
#include "mvimg/scene.hpp"
#include "mvimg/units.hpp"

namespace mvimg {

struct PhaseLawParams {
  double bs_center{};   // theta_i bar [rad]
  double refl_center{}; // theta_o bar [rad]
  double refl_width{};  // Delta theta_o [rad]
  double lambda_x{};    // [m]
  double lambda_tau{std::numeric_limits<double>::infinity()}; // [s], inf = static plane
  ReflectionCodebook codebook;
};

// Space-time angular difference imposed by the plane, before quantization.
inline double angular_difference(double x, double tau, const PhaseLawParams &p) {
  double arg = kTwoPi * x / p.lambda_x;
  if (std::isfinite(p.lambda_tau)) {
    arg -= kTwoPi * tau / p.lambda_tau;
  }
  return p.refl_center - p.bs_center + 0.5 * p.refl_width * std::cos(arg);
}

// Nearest codebook entry; exact ties go to the smaller angle.
inline std::size_t nearest_index(double angle, std::span<const double> grid) {
  if (grid.empty()) {
    throw std::invalid_argument("quantize: empty codebook");
  }
  std::size_t best = 0;
  double best_err = std::abs(angle - grid[0]);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double err = std::abs(angle - grid[k]);
    const double tol = 1e-12 * std::max(1.0, std::abs(angle));
    if (err < best_err - tol) {
      best = k;
      best_err = err;
    } else if (std::abs(err - best_err) <= tol && grid[k] < grid[best]) {
      best = k;
    }
  }
  return best;
}

inline double quantize_to_codebook(double angle, std::span<const double> grid) {
  return grid[nearest_index(angle, grid)];
}

// Index into the reflection codebook selected at (x, tau).
inline std::size_t quantized_index(double x, double tau, const PhaseLawParams &p) {
  const double reflected = angular_difference(x, tau, p) + p.bs_center;
  return nearest_index(reflected, p.codebook.angles);
}

// The quantizer works on reflected angles, so theta_i bar + result lies on Theta_o.
inline double quantized_angular_difference(double x, double tau, const PhaseLawParams &p) {
  return p.codebook.angles[quantized_index(x, tau, p)] - p.bs_center;
}

// Linear phase slope [rad/m] steering theta_i bar into theta_i bar + diff.
inline double phase_gradient(double diff, double bs_center, double wavelength) {
  return kTwoPi / wavelength * (std::sin(bs_center) - std::sin(bs_center + diff));
}

inline double phase_profile(double x, double diff, double bs_center, double wavelength) {
  return wrap_two_pi(phase_gradient(diff, bs_center, wavelength) * x);
}

// Sum_m exp(j phi_m) exp(-j k x_m (sin theta_in - sin theta_out)).
inline cdouble reflected_array_response(std::span<const double> phases,
                                        std::span<const double> positions, double theta_in,
                                        double theta_out, double wavelength) {
  if (phases.empty() || phases.size() != positions.size()) {
    throw std::invalid_argument("reflected_array_response: need matching, non-empty inputs");
  }
  const double kk = kTwoPi / wavelength * (std::sin(theta_in) - std::sin(theta_out));
  cdouble acc{};
  for (std::size_t m = 0; m < phases.size(); ++m) {
    acc += std::polar(1.0, phases[m] - kk * positions[m]);
  }
  return acc;
}

enum class PlanKind { space_time, constant };

// Plane configuration over time. Elements are grouped into contiguous modules
// of n_mod elements; each module applies a constant gradient referenced to its
// own center. Phases are a pure function of (tau, sweep).
class PhasePlan {
public:
  PhasePlan(const Scene &scene, PhaseLawParams law, int n_mod, double sweep_duration)
      : scene_(scene), law_(std::move(law)), n_mod_(n_mod), sweep_duration_(sweep_duration),
        kind_(PlanKind::space_time) {
    if (n_mod_ < 1) {
      throw std::invalid_argument("PhasePlan: module size must be >= 1");
    }
    if (!(law_.lambda_x > 0.0) || !(law_.lambda_tau > 0.0)) {
      throw std::invalid_argument("PhasePlan: periods must be positive");
    }
    if (law_.codebook.angles.empty()) {
      throw std::invalid_argument("PhasePlan: empty reflection codebook");
    }
    init_centers();
  }

  // Time-invariant plan with one angular difference over the whole plane.
  static PhasePlan constant(const Scene &scene, double bs_center, double difference) {
    PhaseLawParams law;
    law.bs_center = bs_center;
    law.refl_center = bs_center + difference;
    law.lambda_x = 1.0;
    law.codebook.center = law.refl_center;
    law.codebook.angles = {law.refl_center};
    PhasePlan plan(scene, law, scene.element_count, 1.0);
    plan.kind_ = PlanKind::constant;
    plan.constant_diff_ = difference;
    return plan;
  }

  [[nodiscard]] PlanKind kind() const { return kind_; }
  [[nodiscard]] const PhaseLawParams &law() const { return law_; }
  [[nodiscard]] const Scene &scene() const { return scene_; }
  [[nodiscard]] int module_size() const { return n_mod_; }
  [[nodiscard]] double sweep_duration() const { return sweep_duration_; }
  [[nodiscard]] std::size_t module_count() const { return centers_.size(); }
  [[nodiscard]] std::size_t module_of(std::size_t element) const {
    return element / static_cast<std::size_t>(n_mod_);
  }
  [[nodiscard]] IndexRange module_elements(std::size_t module) const {
    const auto n = static_cast<std::size_t>(n_mod_);
    return {module * n, std::min((module + 1) * n, static_cast<std::size_t>(scene_.element_count))};
  }
  [[nodiscard]] double module_center(std::size_t module) const { return centers_[module]; }

  [[nodiscard]] double effective_time(double tau, std::size_t sweep) const {
    return tau + static_cast<double>(sweep) * sweep_duration_;
  }

  // Quantized angular difference of a module at in-sweep time tau.
  [[nodiscard]] double module_difference(std::size_t module, double tau, std::size_t sweep) const {
    if (kind_ == PlanKind::constant) {
      return constant_diff_;
    }
    return quantized_angular_difference(centers_[module], effective_time(tau, sweep), law_);
  }

  [[nodiscard]] std::size_t module_codebook_index(std::size_t module, double tau,
                                                  std::size_t sweep) const {
    if (kind_ == PlanKind::constant) {
      return 0;
    }
    return quantized_index(centers_[module], effective_time(tau, sweep), law_);
  }

  // Phases of elements [range.begin, range.end).
  [[nodiscard]] std::vector<double> phases(IndexRange range, double tau, std::size_t sweep) const {
    std::vector<double> out;
    out.reserve(range.size());
    const double lambda = scene_.wavelength();
    std::size_t cached_module = static_cast<std::size_t>(-1);
    double slope = 0.0;
    for (std::size_t i = range.begin; i < range.end; ++i) {
      const std::size_t m = module_of(i);
      if (m != cached_module) {
        cached_module = m;
        slope = phase_gradient(module_difference(m, tau, sweep), law_.bs_center, lambda);
      }
      out.push_back(wrap_two_pi(slope * (scene_.element_x(i) - centers_[m])));
    }
    return out;
  }

private:
  void init_centers() {
    const auto n = static_cast<std::size_t>(scene_.element_count);
    const auto step = static_cast<std::size_t>(n_mod_);
    centers_.clear();
    for (std::size_t first = 0; first < n; first += step) {
      const std::size_t last = std::min(first + step, n) - 1;
      centers_.push_back(0.5 * (scene_.element_x(first) + scene_.element_x(last)));
    }
  }

  Scene scene_;
  PhaseLawParams law_;
  int n_mod_;
  double sweep_duration_;
  PlanKind kind_;
  double constant_diff_{};
  std::vector<double> centers_;
};

// Phases of every element at in-sweep time tau of the given sweep. Elements
// outside the illuminated set are configured too; only the illuminated ones
// reach the receiver.
inline std::vector<double> snapshot_configuration(double tau, std::size_t sweep,
                                                  const PhasePlan &plan) {
  return plan.phases({0, static_cast<std::size_t>(plan.scene().element_count)}, tau, sweep);
}

inline PhasePlan mirror_baseline_plan(const Scene &scene, double bs_center, double refl_center) {
  return PhasePlan::constant(scene, bs_center, refl_center - bs_center);
}

} // namespace mvimg
