// SPDX-License-Identifier: Apache-2.0
#include "tc/strpack.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>

#include "tc/error.hpp"
#include "text.hpp"

namespace tc {

TrajPoint3D summarize(const Trajectory& trajectory, std::size_t index) {
  require(!trajectory.points.empty(), ErrorKind::kInvalidArgument,
          "cannot summarize empty trajectory '" + trajectory.id + "'");
  TrajPoint3D out{index, 0.0, 0.0, 0.0};
  for (const auto& p : trajectory.points) {
    out.t += static_cast<double>(p.t);
    out.x += p.x;
    out.y += p.y;
  }
  const auto n = static_cast<double>(trajectory.points.size());
  out.t /= n;
  out.x /= n;
  out.y /= n;
  return out;
}

std::vector<TrajPoint3D> normalize_axes(std::span<const TrajPoint3D> points) {
  std::vector<TrajPoint3D> out(points.begin(), points.end());
  if (out.empty()) return out;
  auto scale_axis = [&](double TrajPoint3D::*axis) {
    const auto [lo, hi] = std::minmax_element(
        out.begin(), out.end(), [axis](const auto& a, const auto& b) { return a.*axis < b.*axis; });
    const double min = (*lo).*axis;
    const double range = (*hi).*axis - min;
    for (auto& p : out) p.*axis = range > 0.0 ? (p.*axis - min) / range : 0.0;
  };
  scale_axis(&TrajPoint3D::t);
  scale_axis(&TrajPoint3D::x);
  scale_axis(&TrajPoint3D::y);
  return out;
}

std::size_t str_slab_count(std::size_t leaves) {
  std::size_t s = 1;
  while (s * s * s < leaves) ++s;
  return s;
}

GroupAssignment str_pack(std::span<const TrajPoint3D> points, std::size_t capacity) {
  require(capacity >= 1, ErrorKind::kInvalidArgument, "STR capacity must be >= 1");
  require(!points.empty(), ErrorKind::kInvalidArgument, "STR needs at least one point");
  const std::size_t n = points.size();
  const std::size_t leaves = (n + capacity - 1) / capacity;
  const std::size_t s = str_slab_count(leaves);

  std::vector<TrajPoint3D> order(points.begin(), points.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    return a.t != b.t ? a.t < b.t : a.traj_index < b.traj_index;
  });

  GroupAssignment out;
  out.capacity = capacity;
  const std::size_t t_slab = capacity * s * s;
  const std::size_t x_slab = capacity * s;
  for (std::size_t a = 0; a < n; a += t_slab) {
    const auto a_end = std::min(n, a + t_slab);
    std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(a),
                     order.begin() + static_cast<std::ptrdiff_t>(a_end),
                     [](const auto& p, const auto& q) { return p.x < q.x; });
    for (std::size_t b = a; b < a_end; b += x_slab) {
      const auto b_end = std::min(a_end, b + x_slab);
      std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(b),
                       order.begin() + static_cast<std::ptrdiff_t>(b_end),
                       [](const auto& p, const auto& q) { return p.y < q.y; });
      for (std::size_t c = b; c < b_end; c += capacity) {
        const auto c_end = std::min(b_end, c + capacity);
        std::vector<std::size_t> group;
        for (std::size_t i = c; i < c_end; ++i) group.push_back(order[i].traj_index);
        out.groups.push_back(std::move(group));
      }
    }
  }
  return out;
}

void write_groups_csv(std::ostream& out, const GroupAssignment& groups,
                      std::span<const std::string> ids) {
  out << "traj_id,group_id\n";
  for (std::size_t g = 0; g < groups.groups.size(); ++g) {
    for (auto idx : groups.groups[g]) {
      require(idx < ids.size(), ErrorKind::kInvalidArgument, "group member index out of range");
      out << ids[idx] << ',' << g << '\n';
    }
  }
}

GroupAssignment read_groups_csv(std::istream& in, std::span<const std::string> ids,
                                std::size_t capacity) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], i);
  std::map<std::int64_t, std::vector<std::size_t>> by_group;
  std::string line;
  std::size_t line_no = 0;
  std::vector<bool> seen(ids.size(), false);
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || (line_no == 1 && body.starts_with("traj_id"))) continue;
    const auto fields = text::split(body, ',');
    const auto where = "groups line " + std::to_string(line_no) + ": ";
    require(fields.size() == 2, ErrorKind::kParse, where + "expected traj_id,group_id");
    const auto it = index.find(std::string(text::trim(fields[0])));
    require(it != index.end(), ErrorKind::kValidation,
            where + "unknown trajectory '" + std::string(fields[0]) + "'");
    const auto gid = text::parse_int(fields[1]);
    require(gid.has_value(), ErrorKind::kParse, where + "malformed group id");
    require(!seen[it->second], ErrorKind::kValidation,
            where + "trajectory '" + it->first + "' assigned twice");
    seen[it->second] = true;
    by_group[*gid].push_back(it->second);
  }
  GroupAssignment out;
  out.capacity = capacity;
  for (auto& [gid, members] : by_group) out.groups.push_back(std::move(members));
  return out;
}

}  // namespace tc
