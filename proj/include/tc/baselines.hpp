// SPDX-License-Identifier: Apache-2.0
//
// Convoy and closed-swarm mining over time-aligned snapshots.
#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tc/geo.hpp"

namespace tc {

struct Snapshot {
  Timestamp t = 0;
  std::vector<std::size_t> objects;  // ascending object indices
  std::vector<double> x, y;          // parallel to objects
};

/// Resamples every trajectory onto one shared lattice (anchored at the
/// earliest timestamp) and returns one snapshot per lattice time between
/// the first and last sample, including empty ones. Objects are indices
/// into `trajectories`.
std::vector<Snapshot> build_snapshots(std::span<const Trajectory> trajectories, Timestamp step);

struct PatternParams {
  std::size_t k = 18;  // minimum number of timestamps
  std::size_t m = 2;   // minimum number of objects
  double e = 3.0;      // density distance in meters
};

/// DBSCAN(e, m) on the snapshot's positions. Each cluster lists ascending
/// object indices; clusters are ordered by discovery.
std::vector<std::vector<std::size_t>> snapshot_clusters(const Snapshot& snapshot, double e,
                                                        std::size_t m);

struct Convoy {
  std::vector<std::size_t> objects;
  Timestamp t_from = 0;
  Timestamp t_to = 0;
  std::size_t span = 0;  // number of snapshots covered

  friend bool operator==(const Convoy&, const Convoy&) = default;
};

struct Swarm {
  std::vector<std::size_t> objects;
  std::vector<Timestamp> timestamps;

  friend bool operator==(const Swarm&, const Swarm&) = default;
};

/// Per-snapshot cluster id of every object (−1 when absent or unclustered).
struct ClusterTimeline {
  std::vector<Timestamp> times;
  std::vector<std::vector<int>> cluster_of;  // [snapshot][object]
};

ClusterTimeline cluster_timeline(std::span<const Snapshot> snapshots, std::size_t n_objects,
                                 const PatternParams& params);

/// Candidate intersection over consecutive snapshots. Emits every object
/// set of ≥ m members that stays inside one cluster for ≥ k consecutive
/// snapshots, keeping only results not dominated by another result with a
/// superset of objects and a covering interval. Sorted by (t_from, objects).
std::vector<Convoy> mine_convoys(const ClusterTimeline& timeline, const PatternParams& params);

/// Closed swarms by depth-first object-set growth with the timestamp
/// support prune. Sorted by object set.
std::vector<Swarm> mine_swarms(const ClusterTimeline& timeline, const PatternParams& params);

/// True when the objects share one cluster at every covered snapshot.
bool convoy_holds(const ClusterTimeline& timeline, const Convoy& convoy);

struct CompanionSummary {
  std::size_t n_clusters = 0;
  std::size_t n_singles = 0;
};

CompanionSummary companion_report(std::span<const std::vector<std::size_t>> pattern_objects,
                                  std::size_t n_objects);

/// `pattern_id,kind,member_ids,ts_from,ts_to_or_count`, members ';'-joined.
void write_convoys_csv(std::ostream& out, std::span<const Convoy> convoys,
                       std::span<const std::string> ids);
void write_swarms_csv(std::ostream& out, std::span<const Swarm> swarms,
                      std::span<const std::string> ids);

}  // namespace tc
