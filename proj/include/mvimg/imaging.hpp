// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "mvimg/forward.hpp"
#include "mvimg/metasurface.hpp"
#include "mvimg/parallel.hpp"
#include "mvimg/scene.hpp"
#include "mvimg/schedule.hpp"

namespace mvimg {

// Pixel centers at origin + (ix, iy) * spacing, row-major in y.
struct ImageGrid {
  Point2 origin;
  double spacing{};
  std::size_t nx{};
  std::size_t ny{};

  [[nodiscard]] std::size_t size() const { return nx * ny; }
  [[nodiscard]] Point2 point(std::size_t ix, std::size_t iy) const {
    return {origin.x + static_cast<double>(ix) * spacing,
            origin.y + static_cast<double>(iy) * spacing};
  }
  bool operator==(const ImageGrid &o) const {
    return origin.x == o.origin.x && origin.y == o.origin.y && spacing == o.spacing &&
           nx == o.nx && ny == o.ny;
  }
};

inline ImageGrid make_image_grid(const Roi &roi, double spacing) {
  if (!(spacing > 0.0)) {
    throw std::invalid_argument("make_image_grid: pixel spacing must be positive");
  }
  auto count = [&](double extent) {
    return static_cast<std::size_t>(std::ceil(extent / spacing - 1e-9)) + 1;
  };
  return {{roi.x_min(), roi.y_min()}, spacing, count(roi.width), count(roi.height)};
}

struct ComplexImage {
  ImageGrid grid;
  std::vector<cdouble> pixels;
  std::size_t sweeps_used{};
  std::uint64_t seed{};
  std::size_t out_of_window{}; // sampled-mode queries that fell outside the fast-time window

  [[nodiscard]] cdouble at(std::size_t ix, std::size_t iy) const { return pixels[iy * grid.nx + ix]; }
};

struct BackprojectOptions {
  unsigned threads{1};
  // false: rotate by the propagation phase only
  bool compensate_plane_phase{true};
};

namespace detail {

// Summand of the back-projection sum for pixel x and snapshot s. Sets
// `inside` to false when a sampled cube has no data at the query delay.
inline cdouble bp_term(const EchoCube &cube, const SnapshotGeometry &g, std::size_t s, Point2 x,
                       double two_k, bool compensate, bool &inside) {
  inside = true;
  if (g.lit.empty()) {
    return {};
  }
  const double d_o = distance(x, g.p);
  const double path = g.d_i + d_o;
  const cdouble y = cube.evaluate(s, 2.0 * path / kSpeedOfLight, inside);
  if (!inside || y == cdouble{}) {
    return {};
  }
  cdouble comp = std::polar(1.0, two_k * path);
  if (compensate) {
    const cdouble resp = g.plane_response((x.x - g.p.x) / d_o);
    const double mag = std::abs(resp);
    if (mag > 0.0) {
      const cdouble u = std::conj(resp) / mag;
      comp *= u * u;
    }
  }
  return y * comp;
}

inline std::vector<SnapshotGeometry> prepare_schedule(const Scene &scene,
                                                      const SweepSchedule &schedule,
                                                      const PhasePlan &plan) {
  std::vector<SnapshotGeometry> geo;
  geo.reserve(schedule.size());
  for (const auto &snap : schedule.snapshots) {
    geo.push_back(prepare_snapshot(scene, plan, snap));
  }
  return geo;
}

} // namespace detail

// Coherent back-projection over the schedule. Each echo is read at the
// pixel's round-trip delay and rotated by exp(+j 2k (D_i + D_o)) and by the
// conjugate phase of the plane response S(tau; x)^2 the pixel would produce.
// Snapshots are summed in schedule order for every pixel.
inline ComplexImage backproject(const EchoCube &cube, const ImageGrid &grid, const Scene &scene,
                                const SweepSchedule &schedule, const PhasePlan &plan,
                                const BackprojectOptions &opt = {}) {
  if (cube.snapshot_count() != schedule.size()) {
    throw std::invalid_argument("backproject: cube and schedule disagree on snapshot count");
  }
  ComplexImage img;
  img.grid = grid;
  img.pixels.assign(grid.size(), cdouble{});
  img.sweeps_used = schedule.sweeps;
  img.seed = cube.seed;
  if (schedule.size() == 0 || grid.size() == 0) {
    return img;
  }

  const auto geo = detail::prepare_schedule(scene, schedule, plan);
  const double two_k = 2.0 * scene.wavenumber();
  std::atomic<std::size_t> missed{0};

  parallel_for(grid.ny, opt.threads, [&](std::size_t iy) {
    std::size_t row_missed = 0;
    for (std::size_t ix = 0; ix < grid.nx; ++ix) {
      const Point2 x = grid.point(ix, iy);
      cdouble acc{};
      for (std::size_t s = 0; s < geo.size(); ++s) {
        bool inside = true;
        acc += detail::bp_term(cube, geo[s], s, x, two_k, opt.compensate_plane_phase, inside);
        if (!inside) {
          ++row_missed;
        }
      }
      img.pixels[iy * grid.nx + ix] = acc;
    }
    missed += row_missed;
  });
  img.out_of_window = missed.load();
  return img;
}

// Individual back-projection summands at one point, in schedule order.
inline std::vector<cdouble> backprojection_terms(const EchoCube &cube, Point2 x,
                                                 const Scene &scene,
                                                 const SweepSchedule &schedule,
                                                 const PhasePlan &plan,
                                                 const BackprojectOptions &opt = {}) {
  const auto geo = detail::prepare_schedule(scene, schedule, plan);
  std::vector<cdouble> out;
  out.reserve(geo.size());
  const double two_k = 2.0 * scene.wavenumber();
  for (std::size_t s = 0; s < geo.size(); ++s) {
    bool inside = true;
    out.push_back(detail::bp_term(cube, geo[s], s, x, two_k, opt.compensate_plane_phase, inside));
  }
  return out;
}

inline ComplexImage accumulate_images(std::span<const ComplexImage> images) {
  if (images.empty()) {
    throw std::invalid_argument("accumulate_images: nothing to accumulate");
  }
  ComplexImage out = images.front();
  for (std::size_t i = 1; i < images.size(); ++i) {
    const auto &im = images[i];
    if (!(im.grid == out.grid)) {
      throw std::invalid_argument("accumulate_images: grid mismatch");
    }
    for (std::size_t p = 0; p < out.pixels.size(); ++p) {
      out.pixels[p] += im.pixels[p];
    }
    out.sweeps_used += im.sweeps_used;
    out.out_of_window += im.out_of_window;
  }
  return out;
}

// Back-projects every sweep separately and sums the images coherently.
inline ComplexImage accumulate_sweeps(const EchoCube &cube, const ImageGrid &grid,
                                      const Scene &scene, const SweepSchedule &schedule,
                                      const PhasePlan &plan, const BackprojectOptions &opt = {}) {
  std::vector<ComplexImage> per_sweep;
  per_sweep.reserve(schedule.sweeps);
  for (std::size_t s = 0; s < schedule.sweeps; ++s) {
    per_sweep.push_back(
        backproject(cube.sweep_slice(s), grid, scene, schedule.sweep_slice(s), plan, opt));
  }
  return accumulate_images(per_sweep);
}

// Bilinear magnitude-squared at a continuous point; 0 outside the grid.
inline double interpolated_power(const ComplexImage &image, Point2 x) {
  const auto &g = image.grid;
  const double fx = (x.x - g.origin.x) / g.spacing;
  const double fy = (x.y - g.origin.y) / g.spacing;
  if (fx < 0.0 || fy < 0.0 || fx > static_cast<double>(g.nx - 1) ||
      fy > static_cast<double>(g.ny - 1)) {
    return 0.0;
  }
  const auto ix = std::min(static_cast<std::size_t>(fx), g.nx > 1 ? g.nx - 2 : 0);
  const auto iy = std::min(static_cast<std::size_t>(fy), g.ny > 1 ? g.ny - 2 : 0);
  const double ax = fx - static_cast<double>(ix);
  const double ay = fy - static_cast<double>(iy);
  auto pw = [&](std::size_t jx, std::size_t jy) {
    return std::norm(image.at(std::min(jx, g.nx - 1), std::min(jy, g.ny - 1)));
  };
  return (1 - ax) * (1 - ay) * pw(ix, iy) + ax * (1 - ay) * pw(ix + 1, iy) +
         (1 - ax) * ay * pw(ix, iy + 1) + ax * ay * pw(ix + 1, iy + 1);
}

// -3 dB width of the mainlobe along the unit direction (ux, uy) through
// `center`, sampled at a quarter pixel. Floored at one pixel.
inline double directional_width(const ComplexImage &image, Point2 center, double ux, double uy) {
  const double step = 0.25 * image.grid.spacing;
  const double half = 0.5 * interpolated_power(image, center);
  if (!(half > 0.0)) {
    throw std::domain_error("directional_width: zero power at the center");
  }
  auto edge = [&](double sign) {
    double prev = half * 2.0;
    for (std::size_t k = 1;; ++k) {
      const double t = sign * step * static_cast<double>(k);
      const double p = interpolated_power(image, {center.x + t * ux, center.y + t * uy});
      if (p < half) {
        return sign * step * (static_cast<double>(k) - 1.0 + (prev - half) / (prev - p));
      }
      prev = p;
    }
  };
  return std::max(edge(+1.0) - edge(-1.0), image.grid.spacing);
}

struct ImageMetrics {
  Point2 peak;
  std::size_t peak_ix{};
  std::size_t peak_iy{};
  double peak_magnitude{};
  double width_x{}; // -3 dB mainlobe width along x [m]
  double width_y{}; // -3 dB mainlobe width along y [m]
  double pslr_db{}; // sidelobe over mainlobe, -inf when no sidelobe exists
};

namespace detail {

// Fractional index where power drops below `half`, walking from `peak` by
// `dir` along a line of `n` samples. Stops at the border when no crossing.
template <typename PowerAt>
double half_power_crossing(std::size_t peak, std::size_t n, int dir, double half, PowerAt power) {
  auto i = static_cast<std::ptrdiff_t>(peak);
  const auto last = static_cast<std::ptrdiff_t>(n) - 1;
  while (true) {
    const std::ptrdiff_t j = i + dir;
    if (j < 0 || j > last) {
      return static_cast<double>(i);
    }
    const double pi = power(static_cast<std::size_t>(i));
    const double pj = power(static_cast<std::size_t>(j));
    if (pj < half) {
      const double frac = (pi - half) / (pi - pj);
      return static_cast<double>(i) + dir * frac;
    }
    i = j;
  }
}

} // namespace detail

inline ImageMetrics image_metrics(const ComplexImage &image) {
  const auto &g = image.grid;
  if (image.pixels.size() != g.size() || g.size() == 0) {
    throw std::invalid_argument("image_metrics: image does not match its grid");
  }
  std::vector<double> pw(image.pixels.size());
  for (std::size_t i = 0; i < pw.size(); ++i) {
    pw[i] = std::norm(image.pixels[i]);
  }
  const auto it = std::max_element(pw.begin(), pw.end());
  if (*it <= 0.0) {
    throw std::domain_error("image_metrics: all-zero image");
  }
  const auto peak_idx = static_cast<std::size_t>(it - pw.begin());
  ImageMetrics m;
  m.peak_ix = peak_idx % g.nx;
  m.peak_iy = peak_idx / g.nx;
  m.peak = g.point(m.peak_ix, m.peak_iy);
  m.peak_magnitude = std::sqrt(*it);
  const double half = 0.5 * (*it);

  auto along_x = [&](std::size_t ix) { return pw[m.peak_iy * g.nx + ix]; };
  auto along_y = [&](std::size_t iy) { return pw[iy * g.nx + m.peak_ix]; };
  const double wx = detail::half_power_crossing(m.peak_ix, g.nx, +1, half, along_x) -
                    detail::half_power_crossing(m.peak_ix, g.nx, -1, half, along_x);
  const double wy = detail::half_power_crossing(m.peak_iy, g.ny, +1, half, along_y) -
                    detail::half_power_crossing(m.peak_iy, g.ny, -1, half, along_y);
  m.width_x = std::max(wx, 1.0) * g.spacing;
  m.width_y = std::max(wy, 1.0) * g.spacing;

  // mainlobe: 4-connected region above -3 dB grown from the peak
  std::vector<std::uint8_t> main(pw.size(), 0);
  std::vector<std::size_t> stack{peak_idx};
  main[peak_idx] = 1;
  while (!stack.empty()) {
    const std::size_t idx = stack.back();
    stack.pop_back();
    const std::size_t ix = idx % g.nx;
    const std::size_t iy = idx / g.nx;
    auto visit = [&](std::size_t j) {
      if (!main[j] && pw[j] >= half) {
        main[j] = 1;
        stack.push_back(j);
      }
    };
    if (ix > 0) visit(idx - 1);
    if (ix + 1 < g.nx) visit(idx + 1);
    if (iy > 0) visit(idx - g.nx);
    if (iy + 1 < g.ny) visit(idx + g.nx);
  }

  double side = 0.0;
  for (std::size_t iy = 0; iy < g.ny; ++iy) {
    for (std::size_t ix = 0; ix < g.nx; ++ix) {
      const std::size_t idx = iy * g.nx + ix;
      if (main[idx] || pw[idx] <= side) {
        continue;
      }
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const auto jx = static_cast<std::ptrdiff_t>(ix) + dx;
          const auto jy = static_cast<std::ptrdiff_t>(iy) + dy;
          if (jx < 0 || jy < 0 || jx >= static_cast<std::ptrdiff_t>(g.nx) ||
              jy >= static_cast<std::ptrdiff_t>(g.ny)) {
            continue;
          }
          if (pw[static_cast<std::size_t>(jy) * g.nx + static_cast<std::size_t>(jx)] > pw[idx]) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) {
        side = pw[idx];
      }
    }
  }
  m.pslr_db = side > 0.0 ? 10.0 * std::log10(side / *it)
                         : -std::numeric_limits<double>::infinity();
  return m;
}

} // namespace mvimg
