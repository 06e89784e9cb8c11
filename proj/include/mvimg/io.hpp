// SPDX-License-Identifier: Apache-2.0
#pragma once

// Artifact serialization: reports, image exports, phase plans, echo cubes.
// Every file goes through atomic_write, so readers see either the complete
// file or nothing.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "mvimg/design.hpp"
#include "mvimg/forward.hpp"
#include "mvimg/imaging.hpp"
#include "mvimg/metasurface.hpp"
#include "mvimg/schedule.hpp"

#include <unistd.h>

namespace mvimg {

namespace fs = std::filesystem;

// Writes into a sibling temp file, then renames over the target.
inline void atomic_write(const fs::path &path, std::string_view bytes) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  const fs::path tmp =
      dir / ("." + path.filename().string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("short write to " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("cannot rename onto " + path.string());
  }
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// JSON has no infinity; unbounded values are written as the string "inf".
inline nlohmann::json json_number(double v) {
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  if (std::isnan(v)) {
    return "nan";
  }
  return v;
}

inline nlohmann::json design_report_json(const DesignReport &r) {
  nlohmann::json j;
  j["lambda_x_m"] = json_number(r.lambda_x);
  j["lambda_tau_s"] = json_number(r.lambda_tau);
  j["n_mod"] = r.n_mod;
  j["a_inf_m"] = json_number(r.a_inf);
  j["dtheta_i_max_rad"] = json_number(r.dtheta_i_max);
  j["dtheta_o_max_rad"] = json_number(r.dtheta_o_max);
  j["dtheta_i_rad"] = json_number(r.dtheta_i);
  j["dtheta_o_rad"] = json_number(r.dtheta_o);
  j["bs_codebook_size"] = r.bs_size;
  j["refl_codebook_size"] = r.refl_size;
  j["refl_center_rad"] = json_number(r.refl_center);
  j["refl_width_rad"] = json_number(r.refl_width);
  j["module_length_m"] = json_number(r.module_length);
  j["warnings"] = r.warnings;
  return j;
}

// |I| in dB relative to the image peak; zero pixels map to -inf.
inline std::vector<double> image_db(const ComplexImage &img) {
  double peak = 0.0;
  for (const auto &p : img.pixels) {
    peak = std::max(peak, std::abs(p));
  }
  std::vector<double> out(img.pixels.size(), -std::numeric_limits<double>::infinity());
  if (peak <= 0.0) {
    return out;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double a = std::abs(img.pixels[i]);
    if (a > 0.0) {
      out[i] = 20.0 * std::log10(a / peak);
    }
  }
  return out;
}

// One row per grid row (increasing y), one column per x. Values below
// -300 dB (including exact zeros) are written as -300.
inline std::string image_csv(const ComplexImage &img) {
  const auto db = image_db(img);
  std::string out;
  out.reserve(db.size() * 10);
  char buf[32];
  for (std::size_t iy = 0; iy < img.grid.ny; ++iy) {
    for (std::size_t ix = 0; ix < img.grid.nx; ++ix) {
      const double v = std::max(db[iy * img.grid.nx + ix], -300.0);
      std::snprintf(buf, sizeof buf, ix == 0 ? "%.4f" : ",%.4f", v);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

// Binary 8-bit PGM over a 40 dB display range, top row = largest y.
inline std::string image_pgm(const ComplexImage &img, double range_db = 40.0) {
  const auto db = image_db(img);
  std::string out = "P5\n" + std::to_string(img.grid.nx) + " " + std::to_string(img.grid.ny) +
                    "\n255\n";
  for (std::size_t r = 0; r < img.grid.ny; ++r) {
    const std::size_t iy = img.grid.ny - 1 - r;
    for (std::size_t ix = 0; ix < img.grid.nx; ++ix) {
      const double v = std::clamp((db[iy * img.grid.nx + ix] + range_db) / range_db, 0.0, 1.0);
      out += static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v)));
    }
  }
  return out;
}

inline nlohmann::json metrics_json(const ImageMetrics &m) {
  nlohmann::json j;
  j["peak_x_m"] = m.peak.x;
  j["peak_y_m"] = m.peak.y;
  j["peak_magnitude"] = m.peak_magnitude;
  j["width_x_m"] = m.width_x;
  j["width_y_m"] = m.width_y;
  j["pslr_db"] = json_number(m.pslr_db);
  return j;
}

// sweep,snapshot,element,phase_rad for every element of every snapshot.
inline std::string phase_plan_csv(const PhasePlan &plan, const SweepSchedule &schedule) {
  std::string out = "sweep,snapshot,element,phase_rad\n";
  char buf[96];
  for (const auto &snap : schedule.snapshots) {
    const auto ph = snapshot_configuration(snap.tau_in_sweep, snap.sweep, plan);
    for (std::size_t e = 0; e < ph.size(); ++e) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.12f\n", snap.sweep, snap.index, e, ph[e]);
      out += buf;
    }
  }
  return out;
}

// --- echo cube ------------------------------------------------------------
//
// Layout (little-endian):
//   char[8]  magic "MVECHO01"
//   u32      mode (0 analytic, 1 sampled)
//   u32      reserved (0)
//   u64      sweeps, per_sweep, target_count, samples_per_snapshot, seed
//   f64      bandwidth_hz, noise_power_w, sample_rate_hz, t0_s
//   payload  analytic: per snapshot, per target: re, im, delay_s
//            sampled:  per snapshot, per sample: re, im

namespace detail {

template <typename T>
void put_le(std::string &out, T v) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U u;
  std::memcpy(&u, &v, sizeof u);
  for (std::size_t b = 0; b < sizeof u; ++b) {
    out += static_cast<char>((u >> (8 * b)) & 0xFF);
  }
}

template <typename T>
T get_le(std::string_view in, std::size_t &pos) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  if (pos + sizeof(U) > in.size()) {
    throw std::runtime_error("echo cube: truncated file");
  }
  U u = 0;
  for (std::size_t b = 0; b < sizeof u; ++b) {
    u |= static_cast<U>(static_cast<unsigned char>(in[pos + b])) << (8 * b);
  }
  pos += sizeof u;
  T v;
  std::memcpy(&v, &u, sizeof v);
  return v;
}

inline constexpr std::string_view kCubeMagic = "MVECHO01";

} // namespace detail

inline std::string serialize_echo_cube(const EchoCube &c) {
  std::string out(detail::kCubeMagic);
  detail::put_le<std::uint32_t>(out, c.mode == EchoMode::sampled ? 1U : 0U);
  detail::put_le<std::uint32_t>(out, 0U);
  detail::put_le<std::uint64_t>(out, c.sweeps);
  detail::put_le<std::uint64_t>(out, c.per_sweep);
  detail::put_le<std::uint64_t>(out, c.target_count);
  detail::put_le<std::uint64_t>(out, c.samples_per_snapshot);
  detail::put_le<std::uint64_t>(out, c.seed);
  detail::put_le<double>(out, c.bandwidth);
  detail::put_le<double>(out, c.noise_power);
  detail::put_le<double>(out, c.sample_rate);
  detail::put_le<double>(out, c.t0);
  if (c.mode == EchoMode::analytic) {
    for (const auto &a : c.analytic) {
      detail::put_le<double>(out, a.amplitude.real());
      detail::put_le<double>(out, a.amplitude.imag());
      detail::put_le<double>(out, a.delay);
    }
  } else {
    for (const auto &s : c.samples) {
      detail::put_le<double>(out, s.real());
      detail::put_le<double>(out, s.imag());
    }
  }
  return out;
}

inline EchoCube deserialize_echo_cube(std::string_view in) {
  if (in.substr(0, detail::kCubeMagic.size()) != detail::kCubeMagic) {
    throw std::runtime_error("echo cube: bad magic");
  }
  std::size_t pos = detail::kCubeMagic.size();
  EchoCube c;
  const auto mode = detail::get_le<std::uint32_t>(in, pos);
  if (mode > 1) {
    throw std::runtime_error("echo cube: unknown mode");
  }
  c.mode = mode == 1 ? EchoMode::sampled : EchoMode::analytic;
  (void)detail::get_le<std::uint32_t>(in, pos);
  c.sweeps = detail::get_le<std::uint64_t>(in, pos);
  c.per_sweep = detail::get_le<std::uint64_t>(in, pos);
  c.target_count = detail::get_le<std::uint64_t>(in, pos);
  c.samples_per_snapshot = detail::get_le<std::uint64_t>(in, pos);
  c.seed = detail::get_le<std::uint64_t>(in, pos);
  c.bandwidth = detail::get_le<double>(in, pos);
  c.noise_power = detail::get_le<double>(in, pos);
  c.sample_rate = detail::get_le<double>(in, pos);
  c.t0 = detail::get_le<double>(in, pos);
  const std::size_t n = c.sweeps * c.per_sweep;
  if (c.mode == EchoMode::analytic) {
    const std::size_t count = n * c.target_count;
    if ((in.size() - pos) / 24 < count) {
      throw std::runtime_error("echo cube: truncated file");
    }
    c.analytic.resize(count);
    for (auto &a : c.analytic) {
      const double re = detail::get_le<double>(in, pos);
      const double im = detail::get_le<double>(in, pos);
      a.amplitude = {re, im};
      a.delay = detail::get_le<double>(in, pos);
    }
  } else {
    const std::size_t count = n * c.samples_per_snapshot;
    if ((in.size() - pos) / 16 < count) {
      throw std::runtime_error("echo cube: truncated file");
    }
    c.samples.resize(count);
    for (auto &s : c.samples) {
      const double re = detail::get_le<double>(in, pos);
      s = {re, detail::get_le<double>(in, pos)};
    }
  }
  if (pos != in.size()) {
    throw std::runtime_error("echo cube: trailing bytes");
  }
  return c;
}

} // namespace mvimg
