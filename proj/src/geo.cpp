// SPDX-License-Identifier: Apache-2.0
#include "tc/geo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "tc/error.hpp"
#include "text.hpp"

namespace tc {

namespace {

constexpr std::size_t kTypicalMinPoints = 20;
constexpr std::size_t kTypicalMaxPoints = 120;

bool looks_like_header(const std::vector<std::string_view>& fields) {
  return fields.size() == 4 && !text::parse_int(fields[1]).has_value();
}

}  // namespace

void validate(const Trajectory& trajectory) {
  const auto& pts = trajectory.points;
  require(pts.size() >= 2, ErrorKind::kValidation,
          "trajectory '" + trajectory.id + "' has fewer than 2 points");
  for (std::size_t i = 0; i < pts.size(); ++i) {
    require(pts[i].t >= 0, ErrorKind::kValidation,
            "trajectory '" + trajectory.id + "' has a negative timestamp");
    require(std::isfinite(pts[i].x) && std::isfinite(pts[i].y), ErrorKind::kValidation,
            "trajectory '" + trajectory.id + "' has a non-finite coordinate");
    if (i > 0) {
      require(pts[i].t > pts[i - 1].t, ErrorKind::kValidation,
              "trajectory '" + trajectory.id + "' has duplicate or decreasing timestamp " +
                  std::to_string(pts[i].t));
    }
  }
}

std::vector<Trajectory> parse_trajectories(std::istream& in, const WarningSink& warn) {
  std::map<std::string, std::vector<RawPoint>, std::less<>> by_id;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty()) continue;
    const auto fields = text::split(body, ',');
    if (line_no == 1 && looks_like_header(fields)) continue;
    const auto where = "line " + std::to_string(line_no) + ": ";
    require(fields.size() == 4, ErrorKind::kParse,
            where + "expected 4 fields traj_id,t,x,y, got " + std::to_string(fields.size()));
    const auto id = text::trim(fields[0]);
    require(!id.empty(), ErrorKind::kParse, where + "empty traj_id");
    const auto t = text::parse_int(fields[1]);
    require(t.has_value(), ErrorKind::kParse,
            where + "timestamp is not an integer: '" + std::string(fields[1]) + "'");
    require(*t >= 0, ErrorKind::kParse, where + "negative timestamp");
    const auto x = text::parse_double(fields[2]);
    const auto y = text::parse_double(fields[3]);
    require(x.has_value() && y.has_value(), ErrorKind::kParse, where + "malformed coordinate");
    require(std::isfinite(*x) && std::isfinite(*y), ErrorKind::kParse,
            where + "non-finite coordinate");
    auto it = by_id.find(id);
    if (it == by_id.end()) it = by_id.emplace(std::string(id), std::vector<RawPoint>{}).first;
    it->second.push_back({*t, *x, *y});
  }

  std::vector<Trajectory> out;
  out.reserve(by_id.size());
  for (auto& [id, points] : by_id) {
    std::stable_sort(points.begin(), points.end(),
                     [](const RawPoint& a, const RawPoint& b) { return a.t < b.t; });
    Trajectory traj{id, std::move(points)};
    validate(traj);
    if (warn && (traj.points.size() < kTypicalMinPoints ||
                 traj.points.size() > kTypicalMaxPoints)) {
      warn("trajectory '" + id + "' has " + std::to_string(traj.points.size()) +
           " points, outside the typical range [20, 120]");
    }
    out.push_back(std::move(traj));
  }
  return out;
}

std::vector<Trajectory> load_trajectories(const std::filesystem::path& path,
                                          const WarningSink& warn) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::kIo, "cannot open trajectory file " + path.string());
  return parse_trajectories(in, warn);
}

void write_trajectories(std::ostream& out, std::span<const Trajectory> trajectories) {
  out << "traj_id,t,x,y\n";
  for (const auto& traj : trajectories) {
    for (const auto& p : traj.points) {
      out << traj.id << ',' << p.t << ',' << text::format_double(p.x) << ','
          << text::format_double(p.y) << '\n';
    }
  }
}

void save_trajectories(const std::filesystem::path& path,
                       std::span<const Trajectory> trajectories) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::kIo, "cannot write " + path.string());
  write_trajectories(out, trajectories);
}

RawPoint Grid::center(std::int64_t cell_id) const {
  const auto col = cell_id % n_cols;
  const auto row = cell_id / n_cols;
  return {0, origin_x + (static_cast<double>(col) + 0.5) * cell_len,
          origin_y + (static_cast<double>(row) + 0.5) * cell_len};
}

Grid build_grid(std::span<const Trajectory> trajectories, double cell_len) {
  require(cell_len > 0.0 && std::isfinite(cell_len), ErrorKind::kInvalidArgument,
          "cell_len must be positive");
  double min_x = INFINITY, min_y = INFINITY, max_x = -INFINITY, max_y = -INFINITY;
  std::size_t count = 0;
  for (const auto& traj : trajectories) {
    for (const auto& p : traj.points) {
      min_x = std::min(min_x, p.x);
      min_y = std::min(min_y, p.y);
      max_x = std::max(max_x, p.x);
      max_y = std::max(max_y, p.y);
      ++count;
    }
  }
  require(count > 0, ErrorKind::kInvalidArgument, "cannot build a grid over zero points");

  Grid grid;
  grid.cell_len = cell_len;
  grid.origin_x = std::floor(min_x / cell_len) * cell_len;
  grid.origin_y = std::floor(min_y / cell_len) * cell_len;
  // floor + 1 keeps a maximum lying exactly on a cell boundary inside the
  // half-open extent.
  const auto span_cells = [&](double hi, double origin) {
    const auto n = static_cast<std::int64_t>(std::floor((hi - origin) / cell_len)) + 1;
    require(n > 0 && n < (std::int64_t{1} << 31), ErrorKind::kInvalidArgument,
            "grid extent too large for cell_len " + text::format_double(cell_len));
    return static_cast<std::int32_t>(n);
  };
  grid.n_cols = span_cells(max_x, grid.origin_x);
  grid.n_rows = span_cells(max_y, grid.origin_y);
  return grid;
}

std::int64_t cell_of(const Grid& grid, double x, double y) {
  const auto col = static_cast<std::int64_t>(std::floor((x - grid.origin_x) / grid.cell_len));
  const auto row = static_cast<std::int64_t>(std::floor((y - grid.origin_y) / grid.cell_len));
  if (col < 0 || col >= grid.n_cols || row < 0 || row >= grid.n_rows) return -1;
  return row * grid.n_cols + col;
}

TokenSeq tokenize(const Trajectory& trajectory, const Grid& grid) {
  TokenSeq seq{trajectory.id, {}};
  seq.tokens.reserve(trajectory.points.size());
  for (std::size_t i = 0; i < trajectory.points.size(); ++i) {
    const auto& p = trajectory.points[i];
    const auto cell = cell_of(grid, p.x, p.y);
    require(cell >= 0, ErrorKind::kValidation,
            "trajectory '" + trajectory.id + "' point " + std::to_string(i) +
                " lies outside the grid");
    seq.tokens.push_back({cell, p.t});
  }
  return seq;
}

Resampled interpolate_uniform(const Trajectory& trajectory, Timestamp step,
                              std::optional<Timestamp> anchor) {
  require(step > 0, ErrorKind::kInvalidArgument, "interpolation step must be positive");
  const auto& src = trajectory.points;
  require(!src.empty(), ErrorKind::kInvalidArgument,
          "cannot interpolate empty trajectory '" + trajectory.id + "'");

  const Timestamp t_first = src.front().t;
  const Timestamp t_last = src.back().t;
  Timestamp t = t_first;
  if (anchor) {
    // First lattice point anchor + k*step that is >= t_first.
    const Timestamp offset = t_first - *anchor;
    const Timestamp k = offset >= 0 ? (offset + step - 1) / step : -((-offset) / step);
    t = *anchor + k * step;
  }

  Resampled out;
  out.trajectory.id = trajectory.id;
  std::size_t seg = 0;
  for (; t <= t_last; t += step) {
    while (seg + 1 < src.size() && src[seg + 1].t <= t) ++seg;
    const auto& a = src[seg];
    if (a.t == t || seg + 1 == src.size()) {
      out.trajectory.points.push_back({t, a.x, a.y});
      continue;
    }
    const auto& b = src[seg + 1];
    const double w = static_cast<double>(t - a.t) / static_cast<double>(b.t - a.t);
    out.trajectory.points.push_back({t, a.x + w * (b.x - a.x), a.y + w * (b.y - a.y)});
  }
  out.degenerate = out.trajectory.points.size() < 2;
  return out;
}

}  // namespace tc
