// SPDX-License-Identifier: Apache-2.0
//
// Sort-Tile-Recursive leaf packing of trajectories in (t, x, y).
#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tc/geo.hpp"

namespace tc {

struct TrajPoint3D {
  std::size_t traj_index = 0;
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
};

struct GroupAssignment {
  std::vector<std::vector<std::size_t>> groups;  // traj indices in STR order
  std::size_t capacity = 0;
};

/// Centroid of the trajectory's (t, x, y) points.
TrajPoint3D summarize(const Trajectory& trajectory, std::size_t index);

/// Min-max scales each axis to [0, 1] (constant axes map to 0).
std::vector<TrajPoint3D> normalize_axes(std::span<const TrajPoint3D> points);

/// 3-D STR with axis order t, x, y. L = ⌈n/C⌉ leaves, S = ⌈L^(1/3)⌉;
/// t-slabs hold C·S² points, x-slabs C·S points, y-runs C points. Ties
/// keep the order of the previous sort, seeded by traj_index.
GroupAssignment str_pack(std::span<const TrajPoint3D> points, std::size_t capacity);

/// Smallest S with S³ ≥ leaves.
std::size_t str_slab_count(std::size_t leaves);

/// `traj_id,group_id`
void write_groups_csv(std::ostream& out, const GroupAssignment& groups,
                      std::span<const std::string> ids);
GroupAssignment read_groups_csv(std::istream& in, std::span<const std::string> ids,
                                std::size_t capacity);

}  // namespace tc
