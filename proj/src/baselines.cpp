// SPDX-License-Identifier: Apache-2.0
#include "tc/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <iterator>
#include <map>
#include <ostream>
#include <tuple>

#include "tc/cluster.hpp"
#include "tc/error.hpp"

namespace tc {

namespace {

void check_params(const PatternParams& p) {
  require(p.k >= 1 && p.m >= 1, ErrorKind::kInvalidArgument, "pattern mining needs k >= 1, m >= 1");
  require(p.e > 0.0, ErrorKind::kInvalidArgument, "pattern mining needs e > 0");
}

std::string join_ids(std::span<const std::size_t> objects, std::span<const std::string> ids) {
  std::string out;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (i) out += ';';
    out += ids[objects[i]];
  }
  return out;
}

bool is_subset(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

std::vector<Snapshot> build_snapshots(std::span<const Trajectory> trajectories, Timestamp step) {
  require(step > 0, ErrorKind::kInvalidArgument, "snapshot step must be > 0");
  Timestamp first = std::numeric_limits<Timestamp>::max();
  Timestamp last = std::numeric_limits<Timestamp>::min();
  for (const auto& tr : trajectories) {
    if (tr.points.empty()) continue;
    first = std::min(first, tr.points.front().t);
    last = std::max(last, tr.points.back().t);
  }
  if (first > last) return {};
  const auto count = static_cast<std::size_t>((last - first) / step) + 1;
  std::vector<Snapshot> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i].t = first + static_cast<Timestamp>(i) * step;
  for (std::size_t obj = 0; obj < trajectories.size(); ++obj) {
    if (trajectories[obj].points.empty()) continue;
    const auto res = interpolate_uniform(trajectories[obj], step, first);
    for (const auto& p : res.trajectory.points) {
      auto& snap = out[static_cast<std::size_t>((p.t - first) / step)];
      snap.objects.push_back(obj);
      snap.x.push_back(p.x);
      snap.y.push_back(p.y);
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> snapshot_clusters(const Snapshot& snapshot, double e,
                                                        std::size_t m) {
  Points pts;
  pts.reserve(snapshot.objects.size());
  for (std::size_t i = 0; i < snapshot.objects.size(); ++i) pts.push_back({snapshot.x[i], snapshot.y[i]});
  const auto labels = dbscan(pts, e, m, DistanceMetric::kEuclidean);
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(labels.n_clusters));
  for (std::size_t i = 0; i < labels.labels.size(); ++i)
    if (labels.labels[i] != kNoise) out[static_cast<std::size_t>(labels.labels[i])].push_back(snapshot.objects[i]);
  return out;
}

ClusterTimeline cluster_timeline(std::span<const Snapshot> snapshots, std::size_t n_objects,
                                 const PatternParams& params) {
  check_params(params);
  ClusterTimeline tl;
  for (const auto& snap : snapshots) {
    require(tl.times.empty() || snap.t > tl.times.back(), ErrorKind::kValidation,
            "snapshots must be strictly time-ordered");
    tl.times.push_back(snap.t);
    std::vector<int> row(n_objects, -1);
    const auto clusters = snapshot_clusters(snap, params.e, params.m);
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      for (auto obj : clusters[c]) {
        require(obj < n_objects, ErrorKind::kInvalidArgument, "snapshot object index out of range");
        row[obj] = static_cast<int>(c);
      }
    }
    tl.cluster_of.push_back(std::move(row));
  }
  return tl;
}

std::vector<Convoy> mine_convoys(const ClusterTimeline& timeline, const PatternParams& params) {
  check_params(params);
  struct Candidate {
    std::vector<std::size_t> objects;
    std::size_t start;
  };
  std::vector<Convoy> found;
  const auto emit = [&](const Candidate& c, std::size_t end) {
    const std::size_t span = end - c.start + 1;
    if (span >= params.k)
      found.push_back({c.objects, timeline.times[c.start], timeline.times[end], span});
  };

  std::vector<Candidate> live;
  for (std::size_t i = 0; i < timeline.times.size(); ++i) {
    const auto& row = timeline.cluster_of[i];
    std::map<int, std::vector<std::size_t>> clusters;
    for (std::size_t obj = 0; obj < row.size(); ++obj)
      if (row[obj] >= 0) clusters[row[obj]].push_back(obj);

    std::map<std::vector<std::size_t>, std::size_t> next;  // object set -> earliest start
    const auto offer = [&](std::vector<std::size_t> objects, std::size_t start) {
      if (objects.size() < params.m) return;
      auto [it, fresh] = next.emplace(std::move(objects), start);
      if (!fresh) it->second = std::min(it->second, start);
    };
    for (const auto& cand : live) {
      bool intact = false;
      for (const auto& [id, members] : clusters) {
        std::vector<std::size_t> inter;
        std::set_intersection(cand.objects.begin(), cand.objects.end(), members.begin(),
                              members.end(), std::back_inserter(inter));
        if (inter.size() == cand.objects.size()) intact = true;
        offer(std::move(inter), cand.start);
      }
      if (!intact && i > 0) emit(cand, i - 1);
    }
    for (const auto& [id, members] : clusters) offer(members, i);

    live.clear();
    for (auto& [objects, start] : next) live.push_back({objects, start});
  }
  if (!timeline.times.empty())
    for (const auto& cand : live) emit(cand, timeline.times.size() - 1);

  // Drop results dominated by a superset over a covering interval.
  std::vector<Convoy> out;
  for (std::size_t a = 0; a < found.size(); ++a) {
    bool dominated = false;
    for (std::size_t b = 0; b < found.size() && !dominated; ++b) {
      if (a == b) continue;
      const auto& x = found[a];
      const auto& y = found[b];
      if (y.t_from <= x.t_from && x.t_to <= y.t_to && is_subset(x.objects, y.objects) &&
          !(x == y))
        dominated = true;
    }
    if (!dominated && std::find(out.begin(), out.end(), found[a]) == out.end())
      out.push_back(found[a]);
  }
  std::sort(out.begin(), out.end(), [](const Convoy& a, const Convoy& b) {
    return std::tie(a.t_from, a.objects, a.t_to) < std::tie(b.t_from, b.objects, b.t_to);
  });
  return out;
}

std::vector<Swarm> mine_swarms(const ClusterTimeline& timeline, const PatternParams& params) {
  check_params(params);
  const std::size_t n_times = timeline.times.size();
  const std::size_t n_objects = n_times ? timeline.cluster_of.front().size() : 0;
  std::vector<Swarm> out;

  // Support of O as (snapshot index, shared cluster id) pairs.
  using Support = std::vector<std::pair<std::size_t, int>>;
  const auto extend = [&](const Support& support, std::size_t obj) {
    Support next;
    for (const auto& [t, c] : support)
      if (timeline.cluster_of[t][obj] == c) next.push_back({t, c});
    return next;
  };
  const auto closed = [&](const std::vector<std::size_t>& objects, const Support& support) {
    for (std::size_t x = 0; x < n_objects; ++x) {
      if (std::binary_search(objects.begin(), objects.end(), x)) continue;
      bool all = true;
      for (const auto& [t, c] : support) {
        if (timeline.cluster_of[t][x] != c) {
          all = false;
          break;
        }
      }
      if (all) return false;
    }
    return true;
  };

  std::vector<std::size_t> objects;
  const auto dfs = [&](auto&& self, const Support& support) -> void {
    if (objects.size() >= params.m && closed(objects, support)) {
      Swarm s{objects, {}};
      for (const auto& [t, c] : support) s.timestamps.push_back(timeline.times[t]);
      out.push_back(std::move(s));
    }
    for (std::size_t x = objects.back() + 1; x < n_objects; ++x) {
      auto next = extend(support, x);
      if (next.size() < params.k) continue;
      objects.push_back(x);
      self(self, next);
      objects.pop_back();
    }
  };
  for (std::size_t x = 0; x < n_objects; ++x) {
    Support support;
    for (std::size_t t = 0; t < n_times; ++t)
      if (timeline.cluster_of[t][x] >= 0) support.push_back({t, timeline.cluster_of[t][x]});
    if (support.size() < params.k) continue;
    objects = {x};
    dfs(dfs, support);
  }
  return out;
}

bool convoy_holds(const ClusterTimeline& timeline, const Convoy& convoy) {
  const auto from = std::lower_bound(timeline.times.begin(), timeline.times.end(), convoy.t_from);
  if (from == timeline.times.end() || *from != convoy.t_from || convoy.objects.empty()) return false;
  const auto first = static_cast<std::size_t>(from - timeline.times.begin());
  if (first + convoy.span > timeline.times.size()) return false;
  for (std::size_t t = first; t < first + convoy.span; ++t) {
    const int c = timeline.cluster_of[t][convoy.objects.front()];
    if (c < 0) return false;
    for (auto obj : convoy.objects)
      if (timeline.cluster_of[t][obj] != c) return false;
  }
  return timeline.times[first + convoy.span - 1] == convoy.t_to;
}

CompanionSummary companion_report(std::span<const std::vector<std::size_t>> pattern_objects,
                                  std::size_t n_objects) {
  std::vector<bool> covered(n_objects, false);
  for (const auto& p : pattern_objects)
    for (auto obj : p) {
      require(obj < n_objects, ErrorKind::kInvalidArgument, "pattern object index out of range");
      covered[obj] = true;
    }
  return {pattern_objects.size(),
          static_cast<std::size_t>(std::count(covered.begin(), covered.end(), false))};
}

void write_convoys_csv(std::ostream& out, std::span<const Convoy> convoys,
                       std::span<const std::string> ids) {
  out << "pattern_id,kind,member_ids,ts_from,ts_to_or_count\n";
  for (std::size_t i = 0; i < convoys.size(); ++i) {
    const auto& c = convoys[i];
    out << i << ",convoy," << join_ids(c.objects, ids) << ',' << c.t_from << ',' << c.t_to << '\n';
  }
}

void write_swarms_csv(std::ostream& out, std::span<const Swarm> swarms,
                      std::span<const std::string> ids) {
  out << "pattern_id,kind,member_ids,ts_from,ts_to_or_count\n";
  for (std::size_t i = 0; i < swarms.size(); ++i) {
    const auto& s = swarms[i];
    out << i << ",swarm," << join_ids(s.objects, ids) << ',' << s.timestamps.front() << ','
        << s.timestamps.size() << '\n';
  }
}

}  // namespace tc
