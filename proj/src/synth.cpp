// SPDX-License-Identifier: Apache-2.0
#include "tc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <unordered_map>

#include "tc/error.hpp"
#include "text.hpp"

namespace tc {

namespace {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

std::vector<Gate> perimeter_gates(const SynthConfig& cfg) {
  const double w = cfg.area_width;
  const double h = cfg.area_height;
  const double perimeter = 2.0 * (w + h);
  std::vector<Gate> gates;
  for (std::size_t i = 0; i < cfg.n_gates; ++i) {
    double s = (static_cast<double>(i) + 0.5) * perimeter / static_cast<double>(cfg.n_gates);
    Vec2 p;
    if (s < w) {
      p = {s, 0.0};
    } else if ((s -= w) < h) {
      p = {w, s};
    } else if ((s -= h) < w) {
      p = {w - s, h};
    } else {
      s -= w;
      p = {0.0, h - s};
    }
    gates.push_back({"gate_" + std::to_string(i + 1), p.x, p.y});
  }
  return gates;
}

double seg_len(const Vec2& a, const Vec2& b) { return std::hypot(b.x - a.x, b.y - a.y); }

/// Point at fraction u ∈ [0, 1] of a polyline's arc length.
Vec2 along(const std::vector<Vec2>& path, double u) {
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) total += seg_len(path[i - 1], path[i]);
  double target = u * total;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const double l = seg_len(path[i - 1], path[i]);
    if (target <= l || i + 1 == path.size()) {
      const double w = l > 0.0 ? std::min(1.0, target / l) : 0.0;
      return {path[i - 1].x + w * (path[i].x - path[i - 1].x),
              path[i - 1].y + w * (path[i].y - path[i - 1].y)};
    }
    target -= l;
  }
  return path.back();
}

std::string padded(char prefix, std::size_t n, std::size_t member) {
  char buf[32];
  if (member == 0)
    std::snprintf(buf, sizeof buf, "%c%04zu", prefix, n);
  else
    std::snprintf(buf, sizeof buf, "%c%04zu_%zu", prefix, n, member);
  return buf;
}

class Generator {
 public:
  explicit Generator(const SynthConfig& cfg) : cfg_(cfg), rng_(cfg.seed), gates_(perimeter_gates(cfg)) {}

  SynthCorpus run() {
    int next_group = 0;
    for (std::size_t g = 0; g < cfg_.n_groups; ++g) {
      const auto plan = plan_walk();
      const auto size = uniform_size(cfg_.group_size_min, cfg_.group_size_max);
      emit_group(plan, size, 'g', g, next_group++, 0);
      if (cfg_.clone_groups) {
        auto clone = plan;
        clone.gate = other_gate(plan.gate);
        clone.path.back() = gate_pos(clone.gate);
        const auto shift = uniform_time(cfg_.clone_shift_min, cfg_.clone_shift_max);
        emit_group(clone, size, 'c', g, next_group++, shift);
      }
    }
    for (std::size_t l = 0; l < cfg_.n_loners; ++l) {
      const auto plan = plan_walk();
      emit_member(plan, padded('l', l, 0), next_group++, 0);
    }
    std::vector<std::size_t> order(corpus_.trajectories.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
      return corpus_.trajectories[a].id < corpus_.trajectories[b].id;
    });
    SynthCorpus out;
    for (auto i : order) {
      out.trajectories.push_back(std::move(corpus_.trajectories[i]));
      out.truth.push_back(std::move(corpus_.truth[i]));
    }
    out.gates = gates_;
    return out;
  }

 private:
  struct Walk {
    std::vector<Vec2> path;  // waypoints, last one is the gate
    std::size_t gate = 0;
    std::size_t n_points = 0;
    Timestamp start = 0;
  };

  std::size_t uniform_size(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  Timestamp uniform_time(Timestamp lo, Timestamp hi) {
    return std::uniform_int_distribution<Timestamp>(lo, hi)(rng_);
  }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  Vec2 gate_pos(std::size_t g) const { return {gates_[g].x, gates_[g].y}; }

  std::size_t other_gate(std::size_t g) {
    if (gates_.size() < 2) return g;
    auto pick = uniform_size(0, gates_.size() - 2);
    return pick >= g ? pick + 1 : pick;
  }

  // Walks backwards from a random gate through random interior waypoints
  // until the path is as long as the sampled duration at a sampled speed.
  Walk plan_walk() {
    Walk w;
    w.gate = uniform_size(0, gates_.size() - 1);
    w.n_points = uniform_size(cfg_.points_min, cfg_.points_max);
    w.start = uniform_time(0, cfg_.start_span);
    const double speed = uniform(cfg_.speed_min, cfg_.speed_max);
    const double needed =
        speed * static_cast<double>(cfg_.sample_period) * static_cast<double>(w.n_points - 1);
    std::vector<Vec2> back{gate_pos(w.gate)};
    double length = 0.0;
    const double margin = std::min(cfg_.area_width, cfg_.area_height) * 0.05;
    while (length < needed) {
      const Vec2 target{uniform(margin, cfg_.area_width - margin),
                        uniform(margin, cfg_.area_height - margin)};
      const double l = seg_len(back.back(), target);
      if (l <= 0.0) continue;
      if (length + l >= needed) {
        const double f = (needed - length) / l;
        back.push_back({back.back().x + f * (target.x - back.back().x),
                        back.back().y + f * (target.y - back.back().y)});
        length = needed;
      } else {
        back.push_back(target);
        length += l;
      }
    }
    if (back.size() == 1) back.push_back(back.front());  // zero-length walk
    w.path.assign(back.rbegin(), back.rend());
    return w;
  }

  void emit_group(const Walk& plan, std::size_t size, char prefix, std::size_t index, int group,
                  Timestamp shift) {
    for (std::size_t m = 1; m <= size; ++m) {
      const auto offset = uniform_time(cfg_.offset_min, cfg_.offset_max);
      emit_member(plan, padded(prefix, index, m), group, shift + offset);
    }
  }

  void emit_member(const Walk& plan, std::string id, int group, Timestamp offset) {
    Trajectory tr;
    tr.id = std::move(id);
    std::normal_distribution<double> jitter(0.0, 1.0);
    for (std::size_t j = 0; j < plan.n_points; ++j) {
      const double u = plan.n_points > 1 ? static_cast<double>(j) / static_cast<double>(plan.n_points - 1) : 1.0;
      const auto p = along(plan.path, u);
      const double jx = cfg_.jitter_sigma * jitter(rng_);
      const double jy = cfg_.jitter_sigma * jitter(rng_);
      tr.points.push_back({plan.start + offset + static_cast<Timestamp>(j) * cfg_.sample_period,
                           p.x + jx, p.y + jy});
    }
    corpus_.truth.push_back({tr.id, group, gates_[plan.gate].name});
    corpus_.trajectories.push_back(std::move(tr));
  }

  const SynthConfig& cfg_;
  std::mt19937_64 rng_;
  std::vector<Gate> gates_;
  SynthCorpus corpus_;
};

}  // namespace

void SynthConfig::validate() const {
  require(group_size_min >= 1 && group_size_min <= group_size_max, ErrorKind::kConfig,
          "synth: group size range must satisfy 1 <= min <= max");
  require(points_min >= 1 && points_min <= points_max, ErrorKind::kConfig,
          "synth: points range must satisfy 1 <= min <= max");
  require(area_width > 0.0 && area_height > 0.0, ErrorKind::kConfig, "synth: area must be positive");
  require(n_gates >= 1, ErrorKind::kConfig, "synth: need at least one gate");
  require(speed_min > 0.0 && speed_min <= speed_max, ErrorKind::kConfig,
          "synth: speed range must satisfy 0 < min <= max");
  require(jitter_sigma >= 0.0, ErrorKind::kConfig, "synth: jitter_sigma must be >= 0");
  require(offset_min >= 0 && offset_min <= offset_max, ErrorKind::kConfig,
          "synth: offset range must satisfy 0 <= min <= max");
  require(sample_period >= 1, ErrorKind::kConfig, "synth: sample_period must be >= 1");
  require(start_span >= 0, ErrorKind::kConfig, "synth: start_span must be >= 0");
  require(!clone_groups || (clone_shift_min >= 0 && clone_shift_min <= clone_shift_max),
          ErrorKind::kConfig, "synth: clone shift range must satisfy 0 <= min <= max");
  require(!clone_groups || n_gates >= 2, ErrorKind::kConfig,
          "synth: clone groups need at least two gates");
  require(n_groups + n_loners >= 1, ErrorKind::kConfig, "synth: corpus would be empty");
}

SynthCorpus generate(const SynthConfig& config) {
  config.validate();
  return Generator(config).run();
}

void write_ground_truth_csv(std::ostream& out, std::span<const GroundTruthRow> rows) {
  out << "traj_id,group_id,gate\n";
  for (const auto& r : rows) out << r.traj_id << ',' << r.group_id << ',' << r.gate << '\n';
}

std::vector<GroundTruthRow> read_ground_truth_csv(std::istream& in) {
  std::vector<GroundTruthRow> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || (line_no == 1 && body.starts_with("traj_id"))) continue;
    const auto f = text::split(body, ',');
    const auto where = "ground truth line " + std::to_string(line_no) + ": ";
    require(f.size() == 3, ErrorKind::kParse, where + "expected traj_id,group_id,gate");
    const auto gid = text::parse_int(f[1]);
    require(gid.has_value(), ErrorKind::kParse, where + "malformed group id");
    out.push_back({std::string(text::trim(f[0])), static_cast<int>(*gid), std::string(text::trim(f[2]))});
  }
  return out;
}

std::vector<int> truth_labels(std::span<const GroundTruthRow> rows,
                              std::span<const std::string> ids) {
  std::unordered_map<std::string, int> by_id;
  for (const auto& r : rows) by_id.emplace(r.traj_id, r.group_id);
  std::vector<int> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    require(it != by_id.end(), ErrorKind::kValidation,
            "trajectory '" + id + "' has no ground-truth row");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace tc
