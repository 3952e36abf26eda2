// SPDX-License-Identifier: Apache-2.0
#include "tc/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "tc/error.hpp"
#include "text.hpp"

namespace tc {

namespace {

double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return std::sqrt(s);
}

struct KeptClusters {
  std::vector<std::vector<std::size_t>> members;
};

KeptClusters collect(std::span<const int> labels) {
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != kNoise) by_label[labels[i]].push_back(i);
  KeptClusters out;
  for (auto& [label, members] : by_label)
    if (members.size() >= 2) out.members.push_back(std::move(members));
  return out;
}

void check_sizes(const Points& points, std::span<const int> labels, const char* what) {
  require(points.size() == labels.size(), ErrorKind::kShape,
          std::string(what) + ": " + std::to_string(points.size()) + " points but " +
              std::to_string(labels.size()) + " labels");
}

std::string format_optional(const std::optional<double>& v) {
  return v ? text::format_double(*v) : "NA";
}

}  // namespace

DistanceMetric parse_distance_metric(const std::string& name) {
  if (name == "cosine") return DistanceMetric::kCosine;
  if (name == "euclidean") return DistanceMetric::kEuclidean;
  fail(ErrorKind::kConfig, "unknown distance metric '" + name + "' (cosine|euclidean)");
}

const char* distance_metric_name(DistanceMetric metric) {
  return metric == DistanceMetric::kCosine ? "cosine" : "euclidean";
}

DistanceMatrix pairwise_distances(const Points& points, DistanceMetric metric) {
  const std::size_t n = points.size();
  DistanceMatrix out{n, std::vector<double>(n * n, 0.0)};
  if (n == 0) return out;
  const std::size_t dim = points.front().size();
  std::vector<double> norms(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    require(points[i].size() == dim, ErrorKind::kShape,
            "point " + std::to_string(i) + " has dimension " + std::to_string(points[i].size()) +
                ", expected " + std::to_string(dim));
    for (double v : points[i]) {
      require(std::isfinite(v), ErrorKind::kNumeric,
              "point " + std::to_string(i) + " has a non-finite coordinate");
    }
    if (metric == DistanceMetric::kCosine) {
      norms[i] = std::sqrt(std::inner_product(points[i].begin(), points[i].end(),
                                              points[i].begin(), 0.0));
      require(norms[i] > 0.0, ErrorKind::kNumeric,
              "cosine distance undefined for zero vector at index " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d;
      if (metric == DistanceMetric::kCosine) {
        const double dot =
            std::inner_product(points[i].begin(), points[i].end(), points[j].begin(), 0.0);
        d = std::max(0.0, 1.0 - dot / (norms[i] * norms[j]));
      } else {
        d = euclidean(points[i], points[j]);
      }
      out.d[i * n + j] = d;
      out.d[j * n + i] = d;
    }
  }
  return out;
}

ClusterLabels dbscan(const DistanceMatrix& dist, double eps, std::size_t min_pts) {
  require(eps >= 0.0, ErrorKind::kInvalidArgument, "dbscan: eps must be >= 0");
  require(min_pts >= 1, ErrorKind::kInvalidArgument, "dbscan: min_pts must be >= 1");
  const std::size_t n = dist.n;
  ClusterLabels out{std::vector<int>(n, kNoise), 0};
  std::vector<std::vector<std::size_t>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (dist(i, j) <= eps) neighbors[i].push_back(j);

  std::vector<bool> visited(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (visited[i] || neighbors[i].size() < min_pts) continue;
    const int id = out.n_clusters++;
    std::vector<std::size_t> queue{i};
    visited[i] = true;
    out.labels[i] = id;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const auto p = queue[q];
      if (neighbors[p].size() < min_pts) continue;  // border point: no expansion
      for (auto nb : neighbors[p]) {
        if (out.labels[nb] == kNoise) out.labels[nb] = id;
        if (!visited[nb]) {
          visited[nb] = true;
          queue.push_back(nb);
        }
      }
    }
  }
  return out;
}

ClusterLabels dbscan(const Points& points, double eps, std::size_t min_pts,
                     DistanceMetric metric) {
  return dbscan(pairwise_distances(points, metric), eps, min_pts);
}

ClusterLabels keep_clusters(std::span<const int> labels, std::size_t min_size) {
  std::unordered_map<int, std::size_t> sizes;
  for (int l : labels)
    if (l != kNoise) ++sizes[l];
  std::unordered_map<int, int> renamed;
  ClusterLabels out{std::vector<int>(labels.size(), kNoise), 0};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l == kNoise || sizes[l] < min_size) continue;
    auto [it, fresh] = renamed.emplace(l, out.n_clusters);
    if (fresh) ++out.n_clusters;
    out.labels[i] = it->second;
  }
  return out;
}

Points l2_normalize(const Points& points) {
  Points out = points;
  for (auto& p : out) {
    const double norm = std::sqrt(std::inner_product(p.begin(), p.end(), p.begin(), 0.0));
    if (norm > 0.0)
      for (auto& v : p) v /= norm;
  }
  return out;
}

std::optional<double> davies_bouldin(const Points& points, std::span<const int> labels) {
  check_sizes(points, labels, "davies_bouldin");
  const auto kept = collect(labels);
  const std::size_t k = kept.members.size();
  if (k < 2) return std::nullopt;
  const std::size_t dim = points.front().size();
  std::vector<std::vector<double>> centroids(k, std::vector<double>(dim, 0.0));
  std::vector<double> scatter(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    const auto& m = kept.members[c];
    for (auto i : m)
      for (std::size_t j = 0; j < dim; ++j) centroids[c][j] += points[i][j];
    for (auto& v : centroids[c]) v /= static_cast<double>(m.size());
    for (auto i : m) scatter[c] += euclidean(points[i], centroids[c]);
    scatter[c] /= static_cast<double>(m.size());
  }
  double total = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    double worst = 0.0;
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      const double sep = euclidean(centroids[a], centroids[b]);
      if (sep == 0.0) return std::nullopt;  // coincident centroids
      worst = std::max(worst, (scatter[a] + scatter[b]) / sep);
    }
    total += worst;
  }
  return total / static_cast<double>(k);
}

std::optional<double> silhouette(const Points& points, std::span<const int> labels) {
  check_sizes(points, labels, "silhouette");
  const auto kept = collect(labels);
  const std::size_t k = kept.members.size();
  if (k < 2) return std::nullopt;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < k; ++c) {
    for (auto i : kept.members[c]) {
      double a = 0.0;
      for (auto j : kept.members[c])
        if (j != i) a += euclidean(points[i], points[j]);
      a /= static_cast<double>(kept.members[c].size() - 1);
      double b = std::numeric_limits<double>::infinity();
      for (std::size_t o = 0; o < k; ++o) {
        if (o == c) continue;
        double s = 0.0;
        for (auto j : kept.members[o]) s += euclidean(points[i], points[j]);
        b = std::min(b, s / static_cast<double>(kept.members[o].size()));
      }
      const double denom = std::max(a, b);
      total += denom > 0.0 ? (b - a) / denom : 0.0;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

std::optional<double> weighted_avg_entropy(std::span<const int> labels,
                                           std::span<const std::string> gate_labels) {
  require(labels.size() == gate_labels.size(), ErrorKind::kShape,
          "weighted_avg_entropy: " + std::to_string(labels.size()) + " labels but " +
              std::to_string(gate_labels.size()) + " gate labels");
  const auto kept = collect(labels);
  if (kept.members.empty()) return std::nullopt;
  std::size_t n_kept = 0;
  for (const auto& m : kept.members) n_kept += m.size();
  double total = 0.0;
  for (const auto& m : kept.members) {
    std::map<std::string, std::size_t> mix;
    for (auto i : m) {
      require(!gate_labels[i].empty(), ErrorKind::kValidation,
              "weighted_avg_entropy: point " + std::to_string(i) + " has no gate label");
      ++mix[gate_labels[i]];
    }
    double h = 0.0;
    for (const auto& [gate, c] : mix) {
      const double p = static_cast<double>(c) / static_cast<double>(m.size());
      h -= p * std::log2(p);
    }
    total += static_cast<double>(m.size()) / static_cast<double>(n_kept) * h;
  }
  return total;
}

std::vector<int> noise_as_singletons(std::span<const int> labels) {
  int next = 0;
  for (int l : labels) next = std::max(next, l + 1);
  std::vector<int> out(labels.begin(), labels.end());
  for (auto& l : out)
    if (l == kNoise) l = next++;
  return out;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  require(a.size() == b.size(), ErrorKind::kShape, "adjusted_rand_index: size mismatch");
  const std::size_t n = a.size();
  const auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
  std::map<std::pair<int, int>, std::size_t> joint;
  std::map<int, std::size_t> row, col;
  for (std::size_t i = 0; i < n; ++i) {
    ++joint[{a[i], b[i]}];
    ++row[a[i]];
    ++col[b[i]];
  }
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, c] : joint) index += pairs(static_cast<double>(c));
  for (const auto& [key, c] : row) sum_a += pairs(static_cast<double>(c));
  for (const auto& [key, c] : col) sum_b += pairs(static_cast<double>(c));
  const double total = pairs(static_cast<double>(n));
  if (total == 0.0) return 1.0;
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // both labelings trivial and identical in shape
  return (index - expected) / (max_index - expected);
}

PairScores pair_scores(std::span<const int> predicted, std::span<const int> truth) {
  require(predicted.size() == truth.size(), ErrorKind::kShape, "pair_scores: size mismatch");
  PairScores out;
  std::uint64_t hits = 0;
  const std::size_t n = predicted.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool same_pred = predicted[i] != kNoise && predicted[i] == predicted[j];
      const bool same_true = truth[i] == truth[j];
      out.predicted_pairs += same_pred;
      out.true_pairs += same_true;
      hits += same_pred && same_true;
    }
  }
  out.precision = out.predicted_pairs ? static_cast<double>(hits) / out.predicted_pairs : 0.0;
  out.recall = out.true_pairs ? static_cast<double>(hits) / out.true_pairs : 0.0;
  return out;
}

std::vector<std::string> assign_gate_labels(std::span<const Trajectory> trajectories,
                                            std::span<const Gate> gates) {
  require(!gates.empty(), ErrorKind::kInvalidArgument, "assign_gate_labels: no gates");
  std::vector<std::string> out;
  out.reserve(trajectories.size());
  for (const auto& tr : trajectories) {
    require(!tr.points.empty(), ErrorKind::kInvalidArgument,
            "assign_gate_labels: trajectory '" + tr.id + "' is empty");
    const auto& last = tr.points.back();
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < gates.size(); ++g) {
      const double d = std::hypot(last.x - gates[g].x, last.y - gates[g].y);
      if (d < best_d) {
        best_d = d;
        best = g;
      }
    }
    out.push_back(gates[best].name);
  }
  return out;
}

void write_gates_csv(std::ostream& out, std::span<const Gate> gates) {
  out << "gate_name,x,y\n";
  for (const auto& g : gates)
    out << g.name << ',' << text::format_double(g.x) << ',' << text::format_double(g.y) << '\n';
}

std::vector<Gate> read_gates_csv(std::istream& in) {
  std::vector<Gate> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || (line_no == 1 && body.starts_with("gate_name"))) continue;
    const auto f = text::split(body, ',');
    const auto where = "gates line " + std::to_string(line_no) + ": ";
    require(f.size() == 3, ErrorKind::kParse, where + "expected gate_name,x,y");
    const auto x = text::parse_double(f[1]);
    const auto y = text::parse_double(f[2]);
    require(x && y, ErrorKind::kParse, where + "malformed coordinate");
    const auto name = std::string(text::trim(f[0]));
    require(!name.empty(), ErrorKind::kParse, where + "empty gate name");
    out.push_back({name, *x, *y});
  }
  require(!out.empty(), ErrorKind::kValidation, "gates file lists no gates");
  return out;
}

std::size_t sweep_length(const SweepConfig& config) {
  require(config.eps_step > 0.0, ErrorKind::kConfig, "sweep step must be > 0");
  require(config.eps_to >= config.eps_from && config.eps_from >= 0.0, ErrorKind::kConfig,
          "sweep range must satisfy 0 <= from <= to");
  const double span = (config.eps_to - config.eps_from) / config.eps_step;
  return static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
}

double sweep_epsilon(const SweepConfig& config, std::size_t i) {
  const double raw = config.eps_from + static_cast<double>(i) * config.eps_step;
  return std::round(raw * 1e12) / 1e12;
}

std::vector<SweepRow> epsilon_sweep(const Points& encodings, const SweepConfig& config,
                                    std::span<const std::string> gate_labels) {
  const std::size_t count = sweep_length(config);
  require(config.min_pts >= 1, ErrorKind::kConfig, "min_pts must be >= 1");
  require(gate_labels.empty() || gate_labels.size() == encodings.size(), ErrorKind::kShape,
          "epsilon_sweep: gate labels do not match encodings");
  const auto dist = pairwise_distances(encodings, config.metric);
  const auto unit = l2_normalize(encodings);
  std::vector<SweepRow> rows;
  rows.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SweepRow row;
    row.report.eps = sweep_epsilon(config, i);
    const auto raw = dbscan(dist, row.report.eps, config.min_pts);
    // Identical labelings at neighboring epsilons are common; reuse metrics.
    if (!rows.empty() && rows.back().labels.labels == keep_clusters(raw.labels).labels) {
      row.labels = rows.back().labels;
      auto prev = rows.back().report;
      prev.eps = row.report.eps;
      row.report = prev;
      rows.push_back(std::move(row));
      continue;
    }
    row.labels = keep_clusters(raw.labels);
    row.report.n_clusters = static_cast<std::size_t>(row.labels.n_clusters);
    row.report.n_noise = static_cast<std::size_t>(
        std::count(row.labels.labels.begin(), row.labels.labels.end(), kNoise));
    row.report.dbi = davies_bouldin(unit, row.labels.labels);
    row.report.silhouette = silhouette(unit, row.labels.labels);
    if (!gate_labels.empty()) row.report.wae = weighted_avg_entropy(row.labels.labels, gate_labels);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const MetricReport> rows) {
  out << "eps,n_clusters,n_noise,dbi,silhouette,wae\n";
  for (const auto& r : rows) {
    out << text::format_double(r.eps) << ',' << r.n_clusters << ',' << r.n_noise << ','
        << format_optional(r.dbi) << ',' << format_optional(r.silhouette) << ','
        << format_optional(r.wae) << '\n';
  }
}

std::vector<MetricReport> read_sweep_csv(std::istream& in) {
  std::vector<MetricReport> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || (line_no == 1 && body.starts_with("eps"))) continue;
    const auto f = text::split(body, ',');
    const auto where = "sweep line " + std::to_string(line_no) + ": ";
    require(f.size() == 6, ErrorKind::kParse, where + "expected 6 fields");
    MetricReport r;
    const auto eps = text::parse_double(f[0]);
    const auto nc = text::parse_int(f[1]);
    const auto nn = text::parse_int(f[2]);
    require(eps && nc && nn && *nc >= 0 && *nn >= 0, ErrorKind::kParse, where + "malformed row");
    r.eps = *eps;
    r.n_clusters = static_cast<std::size_t>(*nc);
    r.n_noise = static_cast<std::size_t>(*nn);
    for (auto [field, slot] : {std::pair{f[3], &r.dbi}, std::pair{f[4], &r.silhouette},
                               std::pair{f[5], &r.wae}}) {
      if (text::trim(field) == "NA") continue;
      const auto v = text::parse_double(field);
      require(v.has_value(), ErrorKind::kParse, where + "malformed metric");
      *slot = v;
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace tc
