// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mvimg/design.hpp"

namespace mvimg {

struct Snapshot {
  std::size_t sweep{};
  std::size_t index{};    // position within the sweep
  double theta_i{};       // [rad]
  double tau_in_sweep{};  // [s]
  double tau{};           // absolute slow time [s]
};

// BS pointing sequence: every sweep visits the whole codebook in order,
// dwelling `dwell` seconds per angle.
struct SweepSchedule {
  std::vector<Snapshot> snapshots;
  std::size_t sweeps{};
  std::size_t per_sweep{};
  double dwell{};

  [[nodiscard]] std::size_t size() const { return snapshots.size(); }
  [[nodiscard]] double sweep_duration() const { return static_cast<double>(per_sweep) * dwell; }
  [[nodiscard]] double total_duration() const {
    return static_cast<double>(sweeps) * sweep_duration();
  }
  [[nodiscard]] std::size_t flat_index(std::size_t sweep, std::size_t index) const {
    return sweep * per_sweep + index;
  }

  [[nodiscard]] SweepSchedule sweep_slice(std::size_t sweep) const {
    if (sweep >= sweeps) {
      throw std::out_of_range("SweepSchedule: sweep index out of range");
    }
    SweepSchedule out{{}, 1, per_sweep, dwell};
    const auto first = snapshots.begin() + static_cast<std::ptrdiff_t>(sweep * per_sweep);
    out.snapshots.assign(first, first + static_cast<std::ptrdiff_t>(per_sweep));
    return out;
  }
};

inline SweepSchedule make_schedule(const BsCodebook &codebook, std::size_t sweeps) {
  if (codebook.angles.empty() || sweeps == 0) {
    throw std::invalid_argument("make_schedule: need a non-empty codebook and >= 1 sweep");
  }
  SweepSchedule s{{}, sweeps, codebook.size(), codebook.dwell};
  s.snapshots.reserve(sweeps * codebook.size());
  const double period = codebook.sweep_duration();
  for (std::size_t sw = 0; sw < sweeps; ++sw) {
    for (std::size_t k = 0; k < codebook.size(); ++k) {
      const double t_in = static_cast<double>(k) * codebook.dwell;
      s.snapshots.push_back(
          {sw, k, codebook.angles[k], t_in, static_cast<double>(sw) * period + t_in});
    }
  }
  return s;
}

} // namespace mvimg
