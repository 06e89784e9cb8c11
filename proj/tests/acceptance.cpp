// SPDX-License-Identifier: Apache-2.0
// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "mvimg/pipeline.hpp"
#include "mvimg/views.hpp"

using namespace mvimg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass{};
  std::string detail;
};

std::string fmt(const char *f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string preset(const char *name) { return std::string(MVIMG_CONFIG_DIR) + "/" + name; }

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

DesignInputs reference_inputs() {
  RunConfig c;
  c.lambda_x_m = 6.0;
  c.refl_size = 15;
  return make_design_inputs(c);
}

// Look direction from the centre of the swept plane segment to `r`.
Point2 look_direction(const Scene &scene, Point2 r) {
  const double dx = r.x - scene.plane_offset;
  const double n = std::hypot(dx, r.y);
  return {dx / n, r.y / n};
}

double cross_range_width(const ComplexImage &img, const Scene &scene, Point2 at) {
  const Point2 u = look_direction(scene, at);
  return directional_width(img, at, -u.y, u.x);
}

// --- 1 -------------------------------------------------------------------
Outcome design_reproduction() {
  const auto in = reference_inputs();
  const auto des = design_system(in);
  const double nd = des.report.n_mod * in.scene.element_spacing;
  const double a_oracle =
      5.0 * (std::tan(deg2rad(35.0)) - std::tan(deg2rad(25.0)));
  const bool ok = std::abs(nd - 0.20) <= 0.01 && std::abs(des.report.a_inf - 1.1695) <= 1e-3 &&
                  std::abs(des.report.a_inf - a_oracle) <= 1e-12;
  return {ok, fmt("N_mod=%d N_mod*d=%.4f m A_inf=%.5f m", des.report.n_mod, nd, des.report.a_inf)};
}

// --- 2 -------------------------------------------------------------------
double phase_oracle(double theta, Point2 r, double D, double lambda) {
  const double px = D * std::tan(theta);
  return 4.0 * kPi / lambda * (std::hypot(px, D) + std::hypot(r.x - px, r.y));
}

Outcome derivative_oracle() {
  std::mt19937_64 rng(20240613);
  std::uniform_real_distribution<double> ut(deg2rad(-60), deg2rad(60));
  std::uniform_real_distribution<double> ux(-20, 20);
  std::uniform_real_distribution<double> uy(-30, -0.5);
  const double lambda = kSpeedOfLight / 28e9;
  const double D = 5.0;
  double worst = 0.0;
  int draws = 0;
  for (int i = 0; i < 100; ++i) {
    const double t = ut(rng);
    const Point2 r{ux(rng), uy(rng)};
    const double h = 1e-5;
    const double fd = (phase_oracle(t + h, r, D, lambda) - phase_oracle(t - h, r, D, lambda)) / (2 * h);
    const double an = propagation_phase_derivative(t, r, D, lambda);
    worst = std::max(worst, std::abs(an - fd) / std::abs(fd));
    ++draws;
  }
  return {worst < 1e-6, fmt("%d draws, max relative error %.3e", draws, worst)};
}

// --- 3 -------------------------------------------------------------------
Outcome phase_law() {
  const auto in = reference_inputs();
  const auto des = design_system(in);
  const double lambda = in.scene.wavelength();
  const double d = in.scene.element_spacing;
  const int n = des.periods.n_mod;
  std::vector<double> xs(static_cast<std::size_t>(n));
  for (int m = 0; m < n; ++m) xs[static_cast<std::size_t>(m)] = (m - 0.5 * (n - 1)) * d;
  double worst_ratio = 0.0;
  for (double q : des.refl.angles) {
    const double diff = q - in.bs_center;
    std::vector<double> ph(xs.size());
    for (std::size_t m = 0; m < xs.size(); ++m) ph[m] = phase_profile(xs[m], diff, in.bs_center, lambda);
    double best = -1.0;
    double arg = 0.0;
    for (int k = -89000; k <= 89000; ++k) { // 0.001 degree scan
      const double t = deg2rad(k * 1e-3);
      const double a = std::abs(reflected_array_response(ph, xs, in.bs_center, t, lambda));
      if (a > best) {
        best = a;
        arg = t;
      }
    }
    const double beamwidth = lambda / (n * d * std::cos(q));
    worst_ratio = std::max(worst_ratio, std::abs(arg - q) / beamwidth);
  }
  return {worst_ratio < 1.0, fmt("%zu angles, max |argmax - target| = %.4f module beamwidths",
                                 des.refl.size(), worst_ratio)};
}

// --- 4 -------------------------------------------------------------------
Outcome factorization() {
  std::mt19937_64 rng(515);
  std::uniform_real_distribution<double> uph(0, kTwoPi);
  std::uniform_real_distribution<double> us(-0.95, 0.95);
  std::uniform_int_distribution<int> um(1, 64);
  const double lambda = kSpeedOfLight / 28e9;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int M = um(rng);
    SnapshotGeometry g;
    g.k = kTwoPi / lambda;
    g.spacing = lambda / 2;
    g.u0 = -0.5 * (M - 1) * g.spacing + 0.01 * us(rng);
    g.lit = {0, static_cast<std::size_t>(M)};
    const double sin_i = us(rng);
    const double sin_o = us(rng);
    std::vector<double> phi(static_cast<std::size_t>(M));
    for (auto &p : phi) p = uph(rng);
    for (int m = 0; m < M; ++m) {
      const double u = g.u0 + m * g.spacing;
      g.coeffs.push_back(std::polar(1.0, phi[static_cast<std::size_t>(m)] - g.k * u * sin_i));
    }
    // extended precision: near-cancelling sums lose digits in double
    std::complex<long double> dbl{};
    for (int m = 0; m < M; ++m) {
      for (int n = 0; n < M; ++n) {
        const long double a = static_cast<long double>(g.u0) + m * static_cast<long double>(g.spacing);
        const long double b = static_cast<long double>(g.u0) + n * static_cast<long double>(g.spacing);
        dbl += std::polar(1.0L, static_cast<long double>(phi[static_cast<std::size_t>(m)]) +
                                    phi[static_cast<std::size_t>(n)] -
                                    static_cast<long double>(g.k) * (a + b) *
                                        (static_cast<long double>(sin_i) - sin_o));
      }
    }
    const cdouble s = g.plane_response(sin_o);
    const cdouble s2 = s * s;
    const std::complex<long double> got(s2.real(), s2.imag());
    worst = std::max(worst, static_cast<double>(std::abs(dbl - got) / std::abs(dbl)));
  }
  return {worst < 1e-12, fmt("50 configurations, max relative error %.3e", worst)};
}

// --- 5, 6 ----------------------------------------------------------------
struct DeskRun {
  RunResult r;
  double cross{};
};

DeskRun desk_run(ImagingMode mode, std::optional<std::size_t> sweeps) {
  const auto cfg = load_config(preset("desk_scale.cfg"));
  RunOverrides o;
  o.mode = mode;
  o.sweeps = sweeps;
  DeskRun d{run_pipeline(cfg, o), 0.0};
  d.cross = cross_range_width(d.r.image, make_scene(d.r.config), d.r.metrics.peak);
  return d;
}

struct DeskRuns {
  DeskRun multi, single, mirror;
};

const DeskRuns &desk_runs() {
  static const DeskRuns runs{desk_run(ImagingMode::multiview, std::nullopt),
                             desk_run(ImagingMode::multiview, 1),
                             desk_run(ImagingMode::mirror, std::nullopt)};
  return runs;
}

Outcome point_target() {
  const auto &runs = desk_runs();
  const auto &m = runs.multi;
  const Scene scene = make_scene(m.r.config);
  const Point2 truth = m.r.config.targets.front().position;
  const double pix = m.r.image.grid.spacing;
  const bool peak_ok = std::abs(m.r.metrics.peak.x - truth.x) <= pix + 1e-9 &&
                       std::abs(m.r.metrics.peak.y - truth.y) <= pix + 1e-9;
  const double R = distance(truth, {scene.plane_offset, 0.0});
  const double limit = scene.wavelength() * R / (2.0 * m.r.design.report.a_inf);
  const bool width_ok = m.cross <= 1.5 * limit;
  const double ratio = runs.mirror.cross / m.cross;
  const bool ratio_ok = ratio >= 4.0;
  return {peak_ok && width_ok && ratio_ok,
          fmt("peak=(%.3f, %.3f) %s; cross-range multi=%.4f m (limit 1.5*%.4f=%.4f) %s; "
              "mirror=%.4f m ratio=%.2f (need >= 4) %s",
              m.r.metrics.peak.x, m.r.metrics.peak.y, peak_ok ? "ok" : "MISS", m.cross, limit,
              1.5 * limit, width_ok ? "ok" : "MISS", runs.mirror.cross, ratio,
              ratio_ok ? "ok" : "MISS")};
}

Outcome sweep_ordering() {
  const auto &runs = desk_runs();
  const double pix = runs.multi.r.image.grid.spacing;
  const double a = runs.mirror.cross;
  const double b = runs.single.cross;
  const double c = runs.multi.cross;
  const bool ok = a - b >= pix && b - c >= pix;
  return {ok, fmt("mirror=%.4f > single-sweep=%.4f > %zu-sweep=%.4f m (pixel %.3f)", a, b,
                  runs.multi.r.schedule.sweeps, c, pix)};
}

// --- 7 -------------------------------------------------------------------
Outcome near_field() {
  RunOverrides o;
  const auto near = run_pipeline(load_config(preset("broadside_near.cfg")), o);
  const auto far = run_pipeline(load_config(preset("broadside_far.cfg")), o);
  const double wn = near.metrics.width_y;
  const double wf = far.metrics.width_y;
  const double rr = kSpeedOfLight / (2.0 * far.config.bandwidth_hz);
  const bool ok = wf / wn >= 1.5 && std::abs(wf - rr) <= 0.3 * rr;
  return {ok, fmt("width_y near(2 m)=%.4f far(25 m)=%.4f ratio=%.2f; c/2B=%.4f (far off by %+.1f%%)",
                  wn, wf, wf / wn, rr, 100.0 * (wf / rr - 1.0))};
}

// --- 8 -------------------------------------------------------------------
// Each target is simulated alone and imaged in a window around it, so the
// widths are free of cross-talk; the design still follows the full ROI.
Outcome fairness() {
  const auto cfg = load_config(preset("desk_scale.cfg"));
  const auto d = run_design(cfg);
  const Scene &scene = d.inputs.scene;
  const double pix = *cfg.pixel_m;
  auto widths_for = [&](std::size_t sweeps) {
    RunConfig c = cfg;
    c.mode = ImagingMode::multiview;
    const auto plan = make_plan(c, scene, d.inputs, d.design);
    const auto sch = make_schedule(d.design.bs, sweeps);
    std::vector<double> w;
    for (double oy : {-0.35, 0.0, 0.35}) {
      for (double ox : {-0.35, 0.0, 0.35}) {
        const Target t{{scene.roi.center.x + ox, scene.roi.center.y + oy}, {1.0, 0.0}};
        AcquisitionOptions ao;
        const auto cube = simulate_acquisition(scene, sch, plan, std::vector<Target>{t}, ao);
        const Roi win{t.position, 0.3, 0.3};
        const auto img = accumulate_sweeps(cube, make_image_grid(win, pix), scene, sch, plan);
        const auto m = image_metrics(img);
        w.push_back(cross_range_width(img, scene, m.peak));
      }
    }
    return w;
  };
  auto cv = [](const std::vector<double> &w) {
    double mean = 0.0;
    for (double v : w) mean += v;
    mean /= static_cast<double>(w.size());
    double var = 0.0;
    for (double v : w) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(w.size())) / mean;
  };
  const auto single = widths_for(1);
  const auto full = widths_for(d.design.refl.size());
  const double cv1 = cv(single);
  const double cvn = cv(full);
  double lo = 1e9, hi = 0;
  for (double v : full) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {cvn < 0.2 && cvn < cv1,
          fmt("CV single-sweep=%.4f, %zu-sweep=%.4f (widths %.4f..%.4f m)", cv1,
              d.design.refl.size(), cvn, lo, hi)};
}

// --- 9 -------------------------------------------------------------------
Outcome determinism() {
  std::string text = slurp(preset("desk_scale.cfg"));
  const std::string from = "echo_mode = analytic";
  const auto pos = text.find(from);
  if (pos == std::string::npos) return {false, "preset layout changed"};
  text.replace(pos, from.size(),
               "echo_mode = sampled\nnoise_dbm = -87\ntx_scale = 1e7\noversample = 4\nsweeps = 3");
  const fs::path dir = fs::temp_directory_path() / fmt("mvimg_acceptance_%d", static_cast<int>(::getpid()));
  fs::create_directories(dir);
  atomic_write(dir / "det.cfg", text);
  std::ostringstream log, err;
  std::vector<std::string> csv;
  for (unsigned threads : {1U, 3U, 1U}) {
    RunOverrides o;
    o.threads = threads;
    o.emit = {"csv"};
    const fs::path out = dir / fmt("t%u_%zu", threads, csv.size());
    if (run_command((dir / "det.cfg").string(), out, o, log, err) != kExitOk) {
      fs::remove_all(dir);
      return {false, "run failed: " + err.str()};
    }
    csv.push_back(slurp(out / "image_db.csv"));
  }
  fs::remove_all(dir);
  const bool ok = !csv[0].empty() && csv[0] == csv[1] && csv[0] == csv[2];
  return {ok, fmt("threads 1/3/1 image_db.csv %zu bytes, %s", csv[0].size(),
                  ok ? "byte-identical" : "DIFFER")};
}

} // namespace

int main() {
  struct Criterion {
    int id;
    const char *name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all{
      {1, "design reproduction", 1.0, design_reproduction},
      {2, "derivative oracle", 1.0, derivative_oracle},
      {3, "phase-law verification", 10.0, phase_law},
      {4, "double-sum factorization", 5.0, factorization},
      {5, "point-target imaging", 120.0, point_target},
      {6, "sweep ordering", 180.0, sweep_ordering},
      {7, "near-field range gain", 180.0, near_field},
      {8, "fairness", 600.0, fairness},
      {9, "determinism", 120.0, determinism},
  };
  int failures = 0;
  for (const auto &c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = dt <= c.budget_s;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("[%s] %d %s: %s; %.2f s (budget %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), dt, c.budget_s, in_time ? "" : ", EXCEEDED");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(all.size()) - failures, all.size());
  return failures == 0 ? 0 : 1;
}
