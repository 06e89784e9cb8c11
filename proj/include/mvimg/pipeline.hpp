// SPDX-License-Identifier: Apache-2.0
#pragma once

// design -> plan -> simulate -> image -> metrics, plus artifact emission.

#include <filesystem>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvimg/config.hpp"
#include "mvimg/design.hpp"
#include "mvimg/forward.hpp"
#include "mvimg/imaging.hpp"
#include "mvimg/io.hpp"
#include "mvimg/metasurface.hpp"
#include "mvimg/schedule.hpp"

namespace mvimg {

inline constexpr const char *kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitInvalid = 2 };

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<ImagingMode> mode;
  std::optional<std::size_t> sweeps;
  unsigned threads{1};
  bool strict{false};
  std::set<std::string> emit{"csv", "pgm", "json"};
};

inline RunConfig apply_overrides(RunConfig cfg, const RunOverrides &o) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.mode) cfg.mode = *o.mode;
  if (o.sweeps) cfg.sweeps = *o.sweeps;
  return cfg;
}

// Thrown when --strict turns warnings into a validation failure.
class StrictViolation : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline PhasePlan make_plan(const RunConfig &cfg, const Scene &scene, const DesignInputs &in,
                           const Design &des) {
  if (cfg.mode == ImagingMode::mirror) {
    return mirror_baseline_plan(scene, in.bs_center, des.refl.center);
  }
  PhaseLawParams law{in.bs_center,           des.refl.center,         des.refl.width,
                     des.periods.lambda_x,   des.periods.lambda_tau,  des.refl};
  if (cfg.mode == ImagingMode::multiview_static) {
    law.lambda_tau = std::numeric_limits<double>::infinity();
  }
  return {scene, law, des.periods.n_mod, des.bs.sweep_duration()};
}

inline std::size_t effective_sweeps(const RunConfig &cfg, const Design &des) {
  if (cfg.sweeps) return *cfg.sweeps;
  return cfg.mode == ImagingMode::multiview ? des.refl.size() : 1;
}

// Every parameter that influences results, after defaults are resolved.
// The manifest hash is computed over this document's canonical dump.
inline nlohmann::json effective_parameters(const RunConfig &cfg, const Design &des) {
  const Scene sc = make_scene(cfg);
  nlohmann::json j;
  j["carrier_hz"] = sc.carrier_hz;
  j["bandwidth_hz"] = sc.bandwidth_hz;
  j["source_height_m"] = sc.source_height;
  j["element_count"] = sc.element_count;
  j["element_spacing_m"] = sc.element_spacing;
  j["plane_offset_m"] = sc.plane_offset;
  j["bs_aperture_m"] = sc.bs_aperture;
  j["roi"] = {sc.roi.center.x, sc.roi.center.y, sc.roi.width, sc.roi.height};
  j["bs_codebook"] = {des.bs.center, des.bs.width, des.bs.step, des.bs.size(), des.bs.dwell};
  j["refl_codebook"] = {des.refl.center, des.refl.width, des.refl.step, des.refl.size()};
  j["lambda_x_m"] = json_number(des.periods.lambda_x);
  j["lambda_tau_s"] = json_number(des.periods.lambda_tau);
  j["n_mod"] = des.periods.n_mod;
  j["bound_grid_n"] = cfg.bound_grid_n;
  j["pixel_m"] = cfg.pixel_m.value_or(0.25 * sc.wavelength());
  j["mode"] = to_string(cfg.mode);
  j["sweeps"] = effective_sweeps(cfg, des);
  j["seed"] = cfg.seed;
  j["noise_dbm"] = cfg.noise_dbm ? nlohmann::json(*cfg.noise_dbm) : nlohmann::json("off");
  j["tx_scale"] = cfg.tx_scale;
  j["echo_mode"] = cfg.echo_mode == EchoMode::sampled ? "sampled" : "analytic";
  j["oversample"] = cfg.oversample;
  j["beam_gating"] = cfg.beam_gating;
  auto &tg = j["targets"] = nlohmann::json::array();
  for (const auto &t : cfg.targets) {
    tg.push_back({t.position.x, t.position.y, t.reflectivity.real(), t.reflectivity.imag()});
  }
  return j;
}

inline std::string config_hash(const nlohmann::json &effective) {
  return hex64(fnv1a64(effective.dump()));
}

struct DesignOutcome {
  DesignInputs inputs;
  Design design;
};

inline DesignOutcome run_design(const RunConfig &cfg) {
  DesignOutcome out;
  out.inputs = make_design_inputs(cfg);
  try {
    out.design = design_system(out.inputs);
  } catch (const std::invalid_argument &e) {
    throw ConfigError(cfg.source, 0, std::string("design: ") + e.what());
  } catch (const std::domain_error &e) {
    throw ConfigError(cfg.source, 0, std::string("design: ") + e.what());
  }
  return out;
}

struct RunResult {
  RunConfig config;
  Design design;
  SweepSchedule schedule;
  std::optional<PhasePlan> plan;
  EchoCube cube;
  ComplexImage image;
  ImageMetrics metrics;
  std::vector<std::string> warnings;
  nlohmann::json effective;
  std::string hash;
};

// Pure computation; writes nothing.
inline RunResult run_pipeline(const RunConfig &cfg_in, const RunOverrides &o) {
  RunResult r;
  r.config = apply_overrides(cfg_in, o);
  const RunConfig &cfg = r.config;
  validate_config(cfg);
  if (cfg.targets.empty()) {
    throw ConfigError(cfg.source, 0, "at least one 'target' line is required to run");
  }
  auto d = run_design(cfg);
  r.design = d.design;
  r.warnings = r.design.report.warnings;
  if (o.strict && !r.warnings.empty()) {
    throw StrictViolation("strict: " + r.warnings.front());
  }
  r.effective = effective_parameters(cfg, r.design);
  r.hash = config_hash(r.effective);

  const Scene &scene = d.inputs.scene;
  r.plan.emplace(make_plan(cfg, scene, d.inputs, r.design));
  r.schedule = make_schedule(r.design.bs, effective_sweeps(cfg, r.design));

  AcquisitionOptions ao;
  ao.mode = cfg.echo_mode;
  ao.oversample = cfg.oversample;
  ao.noise_power = cfg.noise_dbm ? dbm_to_watt(*cfg.noise_dbm) : 0.0;
  ao.seed = cfg.seed;
  ao.beam_gating = cfg.beam_gating;
  ao.tx_scale = cfg.tx_scale;
  ao.threads = o.threads;
  AcquisitionReport rep;
  r.cube = simulate_acquisition(scene, r.schedule, *r.plan, cfg.targets, ao, &rep);
  r.warnings.insert(r.warnings.end(), rep.warnings.begin(), rep.warnings.end());
  if (o.strict && !rep.warnings.empty()) {
    throw StrictViolation("strict: " + rep.warnings.front());
  }

  const auto grid = make_image_grid(scene.roi, cfg.pixel_m.value_or(0.25 * scene.wavelength()));
  BackprojectOptions bo;
  bo.threads = o.threads;
  r.image = accumulate_sweeps(r.cube, grid, scene, r.schedule, *r.plan, bo);
  r.metrics = image_metrics(r.image);
  return r;
}

inline nlohmann::json manifest_json(const RunResult &r, const std::vector<std::string> &outputs) {
  nlohmann::json j;
  j["config_hash"] = r.hash;
  j["seed"] = r.config.seed;
  j["mode"] = to_string(r.config.mode);
  j["sweeps"] = r.schedule.sweeps;
  j["effective_parameters"] = r.effective;
  j["outputs"] = outputs;
  j["warnings"] = r.warnings;
  j["versions"] = {{"mvimg", kVersion},
                   {"compiler", __VERSION__},
                   {"cplusplus", __cplusplus},
                   {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  return j;
}

inline std::vector<std::string> write_run_outputs(const RunResult &r, const fs::path &dir,
                                                  const std::set<std::string> &emit) {
  fs::create_directories(dir);
  std::vector<std::string> written;
  auto put = [&](const std::string &name, const std::string &bytes) {
    atomic_write(dir / name, bytes);
    written.push_back(name);
  };
  put("design_report.json", design_report_json(r.design.report).dump(2) + "\n");
  if (emit.count("plan") != 0U) put("phase_plan.csv", phase_plan_csv(*r.plan, r.schedule));
  if (emit.count("cube") != 0U) put("echo_cube.bin", serialize_echo_cube(r.cube));
  if (emit.count("csv") != 0U) put("image_db.csv", image_csv(r.image));
  if (emit.count("pgm") != 0U) put("image.pgm", image_pgm(r.image));
  if (emit.count("json") != 0U) {
    auto m = metrics_json(r.metrics);
    m["mode"] = to_string(r.config.mode);
    m["sweeps"] = r.schedule.sweeps;
    m["pixel_m"] = r.image.grid.spacing;
    m["out_of_window_queries"] = r.image.out_of_window;
    m["warnings"] = r.warnings;
    put("metrics.json", m.dump(2) + "\n");
  }
  auto all = written;
  all.push_back("manifest.json");
  put("manifest.json", manifest_json(r, all).dump(2) + "\n");
  return written;
}

// CLI-facing entry points: translate failures into exit codes.
inline int run_command(const std::string &config_path, const fs::path &out_dir,
                       const RunOverrides &o, std::ostream &log, std::ostream &err) {
  try {
    const auto cfg = load_config(config_path);
    const auto r = run_pipeline(cfg, o);
    for (const auto &w : r.warnings) err << "warning: " << w << "\n";
    write_run_outputs(r, out_dir, o.emit);
    log << "mode=" << to_string(r.config.mode) << " sweeps=" << r.schedule.sweeps
        << " peak=(" << r.metrics.peak.x << ", " << r.metrics.peak.y << ")"
        << " width_x=" << r.metrics.width_x << " width_y=" << r.metrics.width_y
        << " pslr_db=" << r.metrics.pslr_db << " hash=" << r.hash << "\n";
    return kExitOk;
  } catch (const ConfigError &e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const StrictViolation &e) {
    err << "error: " << config_path << ": " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

inline int design_only_command(const std::string &config_path, bool strict,
                               const std::optional<fs::path> &out_file, std::ostream &out,
                               std::ostream &err) {
  try {
    const auto cfg = load_config(config_path);
    const auto d = run_design(cfg);
    const auto &warnings = d.design.report.warnings;
    for (const auto &w : warnings) err << "warning: " << w << "\n";
    if (strict && !warnings.empty()) {
      err << "error: " << config_path << ": strict: " << warnings.front() << "\n";
      return kExitInvalid;
    }
    const std::string doc = design_report_json(d.design.report).dump(2) + "\n";
    if (out_file) {
      atomic_write(*out_file, doc);
    } else {
      out << doc;
    }
    return kExitOk;
  } catch (const ConfigError &e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

} // namespace mvimg
