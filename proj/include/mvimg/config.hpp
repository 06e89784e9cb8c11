// SPDX-License-Identifier: Apache-2.0
#pragma once

// Run configuration: flat `key = value` text or a single JSON object.
// Angles are given in degrees, noise power in dBm; everything is converted
// to SI on the way in. Unknown keys are rejected with their line number.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mvimg/design.hpp"
#include "mvimg/forward.hpp"
#include "mvimg/scene.hpp"
#include "mvimg/units.hpp"

namespace mvimg {

class ConfigError : public std::runtime_error {
public:
  ConfigError(std::string source, int line, const std::string &msg)
      : std::runtime_error(format(source, line, msg)), source_(std::move(source)), line_(line) {}

  [[nodiscard]] int line() const { return line_; }
  [[nodiscard]] const std::string &source() const { return source_; }

private:
  static std::string format(const std::string &src, int line, const std::string &msg) {
    return line > 0 ? src + ":" + std::to_string(line) + ": " + msg : src + ": " + msg;
  }
  std::string source_;
  int line_;
};

enum class ImagingMode { multiview, multiview_static, mirror };

inline std::string to_string(ImagingMode m) {
  switch (m) {
  case ImagingMode::multiview: return "multiview";
  case ImagingMode::multiview_static: return "multiview-static";
  case ImagingMode::mirror: return "mirror";
  }
  return "?";
}

inline std::optional<ImagingMode> parse_mode(std::string_view s) {
  if (s == "multiview") return ImagingMode::multiview;
  if (s == "multiview-static") return ImagingMode::multiview_static;
  if (s == "mirror") return ImagingMode::mirror;
  return std::nullopt;
}

struct RunConfig {
  // scene
  double carrier_hz{28e9};
  double bandwidth_hz{400e6};
  double source_height_m{5.0};
  int element_count{320};
  std::optional<double> element_spacing_m; // auto: lambda / 2
  std::optional<double> plane_offset_m;    // auto: D tan(bs center)
  double bs_beamwidth_deg{2.5};            // at the sweep center
  std::optional<double> bs_aperture_m;     // overrides the beamwidth
  // codebooks
  double bs_center_deg{30.0};
  double bs_width_deg{10.0};
  std::optional<double> bs_step_deg;
  std::optional<double> refl_center_deg;
  std::optional<double> refl_width_deg;
  std::optional<double> refl_step_deg;
  std::optional<std::size_t> refl_size;
  std::optional<double> lambda_x_m;
  std::optional<double> lambda_tau_ms;
  double sweep_duration_ms{10.0};
  std::size_t bound_grid_n{9};
  // region of interest and image
  double roi_center_x_m{9.5};
  double roi_center_y_m{-14.0};
  double roi_width_m{5.0};
  double roi_height_m{5.0};
  std::optional<double> pixel_m; // auto: lambda / 4
  // acquisition
  ImagingMode mode{ImagingMode::multiview};
  std::optional<std::size_t> sweeps; // auto: |Theta_o| for multiview, else 1
  std::uint64_t seed{1};
  std::optional<double> noise_dbm;   // absent: noiseless
  double tx_scale{1.0};
  EchoMode echo_mode{EchoMode::analytic};
  double oversample{8.0};
  bool beam_gating{false};
  std::vector<Target> targets;

  // provenance for error messages
  std::string source{"<config>"};
  std::map<std::string, int> lines;
  std::vector<int> target_lines;

  [[nodiscard]] int line_of(const std::string &key) const {
    const auto it = lines.find(key);
    return it == lines.end() ? 0 : it->second;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

inline double parse_double(const std::string &v) {
  const std::string t = trim(v);
  double out = 0.0;
  const auto *first = t.data();
  const auto *last = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (t.empty() || ec != std::errc{} || ptr != last || !std::isfinite(out)) {
    throw std::invalid_argument("expected a finite number, got '" + t + "'");
  }
  return out;
}

inline std::uint64_t parse_unsigned(const std::string &v) {
  const std::string t = trim(v);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
    throw std::invalid_argument("expected a non-negative integer, got '" + t + "'");
  }
  return out;
}

inline bool parse_bool(const std::string &v) {
  const std::string t = trim(v);
  if (t == "true" || t == "on" || t == "yes" || t == "1") return true;
  if (t == "false" || t == "off" || t == "no" || t == "0") return false;
  throw std::invalid_argument("expected a boolean, got '" + t + "'");
}

inline bool is_auto(const std::string &v) {
  const std::string t = trim(v);
  return t == "auto" || t == "null";
}

inline std::vector<std::string> split_commas(const std::string &v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(trim(item));
  }
  return out;
}

// `x, y` or `x, y, re, im` [m, m, -, -]
inline Target parse_target(const std::string &v) {
  const auto parts = split_commas(v);
  if (parts.size() != 2 && parts.size() != 4) {
    throw std::invalid_argument("target needs 'x, y' or 'x, y, re, im'");
  }
  Target t;
  t.position = {parse_double(parts[0]), parse_double(parts[1])};
  if (parts.size() == 4) {
    t.reflectivity = {parse_double(parts[2]), parse_double(parts[3])};
  }
  return t;
}

using Setter = std::function<void(RunConfig &, const std::string &)>;

inline const std::map<std::string, Setter> &setters() {
  auto num = [](double RunConfig::*field) {
    return Setter{[field](RunConfig &c, const std::string &v) { c.*field = parse_double(v); }};
  };
  auto opt_num = [](std::optional<double> RunConfig::*field) {
    return Setter{[field](RunConfig &c, const std::string &v) {
      if (is_auto(v)) {
        c.*field = std::nullopt;
      } else {
        c.*field = parse_double(v);
      }
    }};
  };
  static const std::map<std::string, Setter> table = {
      {"carrier_hz", num(&RunConfig::carrier_hz)},
      {"bandwidth_hz", num(&RunConfig::bandwidth_hz)},
      {"source_height_m", num(&RunConfig::source_height_m)},
      {"element_count",
       [](RunConfig &c, const std::string &v) {
         const auto n = parse_unsigned(v);
         if (n > 10'000'000) throw std::invalid_argument("element count is implausibly large");
         c.element_count = static_cast<int>(n);
       }},
      {"element_spacing_m", opt_num(&RunConfig::element_spacing_m)},
      {"plane_offset_m", opt_num(&RunConfig::plane_offset_m)},
      {"bs_beamwidth_deg", num(&RunConfig::bs_beamwidth_deg)},
      {"bs_aperture_m", opt_num(&RunConfig::bs_aperture_m)},
      {"bs_center_deg", num(&RunConfig::bs_center_deg)},
      {"bs_width_deg", num(&RunConfig::bs_width_deg)},
      {"bs_step_deg", opt_num(&RunConfig::bs_step_deg)},
      {"refl_center_deg", opt_num(&RunConfig::refl_center_deg)},
      {"refl_width_deg", opt_num(&RunConfig::refl_width_deg)},
      {"refl_step_deg", opt_num(&RunConfig::refl_step_deg)},
      {"refl_size",
       [](RunConfig &c, const std::string &v) {
         if (is_auto(v)) {
           c.refl_size = std::nullopt;
         } else {
           c.refl_size = parse_unsigned(v);
         }
       }},
      {"lambda_x_m", opt_num(&RunConfig::lambda_x_m)},
      {"lambda_tau_ms", opt_num(&RunConfig::lambda_tau_ms)},
      {"sweep_duration_ms", num(&RunConfig::sweep_duration_ms)},
      {"bound_grid_n",
       [](RunConfig &c, const std::string &v) { c.bound_grid_n = parse_unsigned(v); }},
      {"roi_center_x_m", num(&RunConfig::roi_center_x_m)},
      {"roi_center_y_m", num(&RunConfig::roi_center_y_m)},
      {"roi_width_m", num(&RunConfig::roi_width_m)},
      {"roi_height_m", num(&RunConfig::roi_height_m)},
      {"pixel_m", opt_num(&RunConfig::pixel_m)},
      {"mode",
       [](RunConfig &c, const std::string &v) {
         const auto m = parse_mode(trim(v));
         if (!m) throw std::invalid_argument("mode must be multiview, multiview-static or mirror");
         c.mode = *m;
       }},
      {"sweeps",
       [](RunConfig &c, const std::string &v) {
         if (is_auto(v)) {
           c.sweeps = std::nullopt;
         } else {
           c.sweeps = parse_unsigned(v);
         }
       }},
      {"seed", [](RunConfig &c, const std::string &v) { c.seed = parse_unsigned(v); }},
      {"noise_dbm",
       [](RunConfig &c, const std::string &v) {
         const std::string t = trim(v);
         if (t == "off" || t == "none" || t == "null") {
           c.noise_dbm = std::nullopt;
         } else {
           c.noise_dbm = parse_double(t);
         }
       }},
      {"tx_scale", num(&RunConfig::tx_scale)},
      {"echo_mode",
       [](RunConfig &c, const std::string &v) {
         const std::string t = trim(v);
         if (t == "analytic") {
           c.echo_mode = EchoMode::analytic;
         } else if (t == "sampled") {
           c.echo_mode = EchoMode::sampled;
         } else {
           throw std::invalid_argument("echo_mode must be analytic or sampled");
         }
       }},
      {"oversample", num(&RunConfig::oversample)},
      {"beam_gating", [](RunConfig &c, const std::string &v) { c.beam_gating = parse_bool(v); }},
  };
  return table;
}

inline void apply(RunConfig &c, const std::string &key, const std::string &value, int line) {
  try {
    if (key == "target") {
      c.targets.push_back(parse_target(value));
      c.target_lines.push_back(line);
      return;
    }
    const auto &tab = setters();
    const auto it = tab.find(key);
    if (it == tab.end()) {
      throw ConfigError(c.source, line, "unknown key '" + key + "'");
    }
    if (c.lines.count(key) != 0U) {
      throw ConfigError(c.source, line,
                        "duplicate key '" + key + "' (first set on line " +
                            std::to_string(c.lines[key]) + ")");
    }
    it->second(c, value);
    c.lines[key] = line;
  } catch (const ConfigError &) {
    throw;
  } catch (const std::exception &e) {
    throw ConfigError(c.source, line, key + ": " + e.what());
  }
}

inline int line_at(const std::string &text, std::size_t pos) {
  int line = 1;
  for (std::size_t i = 0; i < pos && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

inline std::string scalar_text(const nlohmann::json &v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_null()) return "auto";
  if (v.is_number()) return v.dump();
  throw std::invalid_argument("expected a scalar value");
}

inline void parse_json(RunConfig &c, const std::string &text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    throw ConfigError(c.source, line_at(text, e.byte == 0 ? 0 : e.byte - 1), "invalid JSON");
  }
  if (!doc.is_object()) {
    throw ConfigError(c.source, 1, "JSON configuration must be an object");
  }
  // nlohmann keeps no positions; locate each key's first quoted occurrence.
  auto key_line = [&](const std::string &key) {
    const auto pos = text.find("\"" + key + "\"");
    return pos == std::string::npos ? 0 : line_at(text, pos);
  };
  for (const auto &[key, value] : doc.items()) {
    const int line = key_line(key);
    if (key == "targets" || key == "target") {
      if (!value.is_array()) {
        throw ConfigError(c.source, line, key + ": expected an array");
      }
      for (const auto &t : value) {
        std::string joined;
        try {
          if (t.is_array()) {
            for (const auto &x : t) {
              joined += (joined.empty() ? "" : ",") + scalar_text(x);
            }
          } else if (t.is_object()) {
            joined = scalar_text(t.at("x")) + "," + scalar_text(t.at("y"));
            if (t.contains("re") || t.contains("im")) {
              joined += "," + scalar_text(t.value("re", nlohmann::json(1.0))) + "," +
                        scalar_text(t.value("im", nlohmann::json(0.0)));
            }
          } else {
            throw std::invalid_argument("target must be an array or object");
          }
        } catch (const std::exception &e) {
          throw ConfigError(c.source, line, key + ": " + e.what());
        }
        apply(c, "target", joined, line);
      }
      continue;
    }
    std::string v;
    try {
      v = scalar_text(value);
    } catch (const std::exception &e) {
      throw ConfigError(c.source, line, key + ": " + e.what());
    }
    apply(c, key, v, line);
  }
}

inline void parse_key_value(RunConfig &c, const std::string &text) {
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(c.source, line, "expected 'key = value'");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ConfigError(c.source, line, "missing key");
    if (value.empty()) throw ConfigError(c.source, line, "missing value for '" + key + "'");
    apply(c, key, value, line);
  }
}

} // namespace detail

// Cross-field checks. Errors point at the line of the offending key, or at
// the file when the value came from a default.
inline void validate_config(const RunConfig &c) {
  auto fail = [&](const std::string &key, const std::string &msg) {
    throw ConfigError(c.source, c.line_of(key), msg);
  };
  if (!(c.carrier_hz > 0.0)) fail("carrier_hz", "carrier_hz must be positive");
  if (!(c.bandwidth_hz > 0.0)) fail("bandwidth_hz", "bandwidth_hz must be positive");
  if (!(c.source_height_m > 0.0)) fail("source_height_m", "source_height_m must be positive");
  if (c.element_count <= 0 || c.element_count % 2 != 0) {
    fail("element_count", "element_count must be positive and even");
  }
  if (c.element_spacing_m && !(*c.element_spacing_m > 0.0)) {
    fail("element_spacing_m", "element_spacing_m must be positive");
  }
  if (c.bs_aperture_m && !(*c.bs_aperture_m > 0.0)) {
    fail("bs_aperture_m", "bs_aperture_m must be positive");
  }
  if (!c.bs_aperture_m && !(c.bs_beamwidth_deg > 0.0 && c.bs_beamwidth_deg < 90.0)) {
    fail("bs_beamwidth_deg", "bs_beamwidth_deg must lie in (0, 90)");
  }
  if (!(c.bs_width_deg >= 0.0)) fail("bs_width_deg", "bs_width_deg must be non-negative");
  if (!(std::abs(c.bs_center_deg) + 0.5 * c.bs_width_deg < 90.0)) {
    fail("bs_width_deg", "BS sweep must stay inside (-90, 90) degrees");
  }
  if (c.bs_step_deg && !(*c.bs_step_deg > 0.0)) fail("bs_step_deg", "bs_step_deg must be positive");
  if (c.refl_width_deg && !(*c.refl_width_deg >= 0.0)) {
    fail("refl_width_deg", "refl_width_deg must be non-negative");
  }
  if (c.refl_step_deg && !(*c.refl_step_deg > 0.0)) {
    fail("refl_step_deg", "refl_step_deg must be positive");
  }
  if (c.refl_size && *c.refl_size == 0) fail("refl_size", "refl_size must be at least 1");
  if (c.lambda_x_m && !(*c.lambda_x_m > 0.0)) fail("lambda_x_m", "lambda_x_m must be positive");
  if (c.lambda_tau_ms && !(*c.lambda_tau_ms > 0.0)) {
    fail("lambda_tau_ms", "lambda_tau_ms must be positive");
  }
  if (!(c.sweep_duration_ms > 0.0)) fail("sweep_duration_ms", "sweep_duration_ms must be positive");
  if (c.roi_width_m < 0.0) fail("roi_width_m", "roi_width_m must be non-negative");
  if (c.roi_height_m < 0.0) fail("roi_height_m", "roi_height_m must be non-negative");
  if (!(c.roi_center_y_m + 0.5 * c.roi_height_m < 0.0)) {
    fail("roi_center_y_m", "ROI must lie strictly below the reflection plane (y < 0)");
  }
  if (c.pixel_m && !(*c.pixel_m > 0.0)) fail("pixel_m", "pixel_m must be positive");
  if (c.sweeps && *c.sweeps == 0) fail("sweeps", "sweeps must be at least 1");
  if (!(c.oversample >= 1.0)) fail("oversample", "oversample must be >= 1");
  if (!(c.tx_scale > 0.0)) fail("tx_scale", "tx_scale must be positive");
  if (c.noise_dbm && c.echo_mode != EchoMode::sampled) {
    fail("noise_dbm", "noise requires echo_mode = sampled");
  }
  const Roi roi{{c.roi_center_x_m, c.roi_center_y_m}, c.roi_width_m, c.roi_height_m};
  for (std::size_t i = 0; i < c.targets.size(); ++i) {
    if (!roi.contains(c.targets[i].position)) {
      const int line = i < c.target_lines.size() ? c.target_lines[i] : 0;
      throw ConfigError(c.source, line, "target lies outside the ROI");
    }
  }
}

inline RunConfig parse_config_text(const std::string &text, const std::string &source = "<config>") {
  RunConfig c;
  c.source = source;
  std::size_t first = 0;
  while (first < text.size() && std::isspace(static_cast<unsigned char>(text[first]))) ++first;
  if (first < text.size() && text[first] == '{') {
    detail::parse_json(c, text);
  } else {
    detail::parse_key_value(c, text);
  }
  validate_config(c);
  return c;
}

inline RunConfig load_config(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError(path, 0, "cannot open configuration file");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

// --- derived quantities ---------------------------------------------------

inline Scene make_scene(const RunConfig &c) {
  Scene s;
  s.carrier_hz = c.carrier_hz;
  s.bandwidth_hz = c.bandwidth_hz;
  s.source_height = c.source_height_m;
  s.element_count = c.element_count;
  const double lambda = s.wavelength();
  const double center = deg2rad(c.bs_center_deg);
  s.element_spacing = c.element_spacing_m.value_or(0.5 * lambda);
  s.plane_offset = c.plane_offset_m.value_or(c.source_height_m * std::tan(center));
  s.bs_aperture =
      c.bs_aperture_m.value_or(lambda / (deg2rad(c.bs_beamwidth_deg) * std::cos(center)));
  s.roi = {{c.roi_center_x_m, c.roi_center_y_m}, c.roi_width_m, c.roi_height_m};
  return s;
}

inline DesignInputs make_design_inputs(const RunConfig &c) {
  DesignInputs in;
  in.scene = make_scene(c);
  in.bs_center = deg2rad(c.bs_center_deg);
  in.bs_width = deg2rad(c.bs_width_deg);
  if (c.bs_step_deg) in.bs_step = deg2rad(*c.bs_step_deg);
  if (c.refl_center_deg) in.refl_center = deg2rad(*c.refl_center_deg);
  if (c.refl_width_deg) in.refl_width = deg2rad(*c.refl_width_deg);
  if (c.refl_step_deg) in.refl_step = deg2rad(*c.refl_step_deg);
  in.refl_size = c.refl_size;
  in.lambda_x = c.lambda_x_m;
  in.sweep_duration = c.sweep_duration_ms * 1e-3;
  if (c.lambda_tau_ms) in.lambda_tau = *c.lambda_tau_ms * 1e-3;
  in.grid_n = c.bound_grid_n;
  return in;
}

} // namespace mvimg
