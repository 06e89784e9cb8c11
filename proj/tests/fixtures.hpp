// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "mvimg/design.hpp"
#include "mvimg/scene.hpp"
#include "mvimg/units.hpp"

namespace fixtures {

using namespace mvimg;

// Reference geometry: 28 GHz, 400 MHz, D = 5 m, half-wavelength plane
// centered under the 30 degree pointing direction, 2.5 degree BS beam.
inline Scene reference_scene(double roi_size = 5.0) {
  Scene s;
  s.carrier_hz = 28e9;
  s.bandwidth_hz = 400e6;
  s.source_height = 5.0;
  s.element_count = 320;
  s.element_spacing = 0.5 * s.wavelength();
  s.plane_offset = 5.0 * std::tan(deg2rad(30.0));
  s.bs_aperture = s.wavelength() / (deg2rad(2.5) * std::cos(deg2rad(30.0)));
  s.roi = {{9.5, -14.0}, roi_size, roi_size};
  return s;
}

inline DesignInputs reference_inputs(double roi_size = 5.0) {
  DesignInputs in;
  in.scene = reference_scene(roi_size);
  in.bs_center = deg2rad(30.0);
  in.bs_width = deg2rad(10.0);
  in.lambda_x = 6.0;
  in.refl_size = 15;
  in.sweep_duration = 0.01;
  return in;
}

inline std::string read_file(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::filesystem::path temp_dir(const std::string &tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() /
             ("mvimg_" + tag + "_" + std::to_string(rng() % 1000000000ULL));
  std::filesystem::create_directories(dir);
  return dir;
}

} // namespace fixtures
