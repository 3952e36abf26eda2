// SPDX-License-Identifier: Apache-2.0
//
// Planted-companion trajectory generator with gate ground truth.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tc/cluster.hpp"
#include "tc/geo.hpp"

namespace tc {

struct SynthConfig {
  std::size_t n_groups = 40;
  std::size_t group_size_min = 2;
  std::size_t group_size_max = 4;
  std::size_t n_loners = 80;
  double area_width = 500.0;
  double area_height = 500.0;
  std::size_t n_gates = 8;
  double speed_min = 0.8;  // m/s
  double speed_max = 1.6;
  double jitter_sigma = 1.0;  // meters, per point and axis
  Timestamp offset_min = 0;   // per-member start offset, seconds
  Timestamp offset_max = 30;
  std::size_t points_min = 20;
  std::size_t points_max = 120;
  Timestamp sample_period = 10;  // seconds between raw points
  Timestamp start_span = 4 * 3600;  // base start times drawn from [0, start_span]
  // Each group gets a clone group that follows the same waypoints
  // clone_shift seconds later and leaves through a different gate.
  bool clone_groups = false;
  Timestamp clone_shift_min = 2 * 3600;
  Timestamp clone_shift_max = 4 * 3600;
  std::uint64_t seed = 7;

  void validate() const;
};

struct GroundTruthRow {
  std::string traj_id;
  int group_id = 0;  // loners get unique ids
  std::string gate;
};

struct SynthCorpus {
  std::vector<Trajectory> trajectories;  // sorted by id
  std::vector<GroundTruthRow> truth;     // parallel to trajectories
  std::vector<Gate> gates;
};

SynthCorpus generate(const SynthConfig& config);

/// `traj_id,group_id,gate`
void write_ground_truth_csv(std::ostream& out, std::span<const GroundTruthRow> rows);
std::vector<GroundTruthRow> read_ground_truth_csv(std::istream& in);

/// Group ids aligned with `ids`; throws kValidation for ids without a row.
std::vector<int> truth_labels(std::span<const GroundTruthRow> rows,
                              std::span<const std::string> ids);

}  // namespace tc
