// SPDX-License-Identifier: Apache-2.0
//
// Trajectory data model: CSV ingestion, grid snapping and time-uniform
// resampling. Coordinates are planar meters, timestamps integer seconds.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tc {

using Timestamp = std::int64_t;

struct RawPoint {
  Timestamp t = 0;
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const RawPoint&, const RawPoint&) = default;
};

struct Trajectory {
  std::string id;
  std::vector<RawPoint> points;  // strictly increasing in t
};

/// Receives non-fatal findings (e.g. trajectory length outside the
/// typical range). May be empty.
using WarningSink = std::function<void(const std::string&)>;

/// Reads `traj_id,t,x,y` rows (header optional, rows in any order).
/// Returns one trajectory per id, points sorted by time, trajectories
/// sorted by id.
std::vector<Trajectory> load_trajectories(const std::filesystem::path& path,
                                          const WarningSink& warn = {});
std::vector<Trajectory> parse_trajectories(std::istream& in,
                                           const WarningSink& warn = {});

/// Writes the canonical CSV form (with header). Reals use shortest
/// round-trip formatting so a reload is exact.
void write_trajectories(std::ostream& out, std::span<const Trajectory> trajectories);
void save_trajectories(const std::filesystem::path& path,
                       std::span<const Trajectory> trajectories);

/// Checks the Trajectory invariants; throws kValidation naming the id.
void validate(const Trajectory& trajectory);

struct Grid {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double cell_len = 1.0;
  std::int32_t n_cols = 1;
  std::int32_t n_rows = 1;

  std::int64_t cell_count() const { return std::int64_t{n_cols} * n_rows; }
  /// Center of a cell in meters.
  RawPoint center(std::int64_t cell_id) const;

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Smallest cell_len-aligned grid covering every point with half-open cells.
Grid build_grid(std::span<const Trajectory> trajectories, double cell_len);

struct Token {
  std::int64_t cell = 0;
  Timestamp t = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

struct TokenSeq {
  std::string id;
  std::vector<Token> tokens;
};

/// −1 outside the grid; tokenize turns that into a kValidation error.
std::int64_t cell_of(const Grid& grid, double x, double y);
TokenSeq tokenize(const Trajectory& trajectory, const Grid& grid);

struct Resampled {
  Trajectory trajectory;
  bool degenerate = false;  // fewer than two lattice points
};

/// Linear interpolation onto the lattice anchor + k*step restricted to
/// [t_first, t_last]. Without an anchor the lattice starts at t_first.
Resampled interpolate_uniform(const Trajectory& trajectory, Timestamp step,
                              std::optional<Timestamp> anchor = std::nullopt);

}  // namespace tc
