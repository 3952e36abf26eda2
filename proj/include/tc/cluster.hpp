// SPDX-License-Identifier: Apache-2.0
//
// DBSCAN over encodings, the epsilon sweep and clustering quality metrics.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tc/geo.hpp"

namespace tc {

inline constexpr int kNoise = -1;

enum class DistanceMetric { kCosine, kEuclidean };

DistanceMetric parse_distance_metric(const std::string& name);
const char* distance_metric_name(DistanceMetric metric);

using Points = std::vector<std::vector<double>>;

/// Dense symmetric n×n distance matrix, row-major.
struct DistanceMatrix {
  std::size_t n = 0;
  std::vector<double> d;

  double operator()(std::size_t i, std::size_t j) const { return d[i * n + j]; }
};

/// Cosine distance is 1 − cos; a zero vector under cosine is a kNumeric error.
DistanceMatrix pairwise_distances(const Points& points, DistanceMetric metric);

struct ClusterLabels {
  std::vector<int> labels;  // cluster ids 0..n_clusters-1 or kNoise
  int n_clusters = 0;
};

/// Standard DBSCAN. Neighborhoods are inclusive (d ≤ eps) and count the
/// point itself. Points are scanned in index order; a border point
/// reachable from several clusters joins the first one discovered.
ClusterLabels dbscan(const DistanceMatrix& dist, double eps, std::size_t min_pts);
ClusterLabels dbscan(const Points& points, double eps, std::size_t min_pts,
                     DistanceMetric metric);

/// Drops clusters with fewer than min_size members (they become noise)
/// and renumbers the rest in order of first appearance.
ClusterLabels keep_clusters(std::span<const int> labels, std::size_t min_size = 2);

/// Rows scaled to unit Euclidean norm (zero rows are kept as zero).
Points l2_normalize(const Points& points);

// The metrics below consider only clusters with ≥ 2 members; other points
// are ignored. DBI and silhouette need at least two such clusters, the
// entropy at least one; otherwise they return nullopt. Distances are
// Euclidean on the given points.
std::optional<double> davies_bouldin(const Points& points, std::span<const int> labels);
std::optional<double> silhouette(const Points& points, std::span<const int> labels);
/// Σ_c (|c|/N_kept)·H_2(gate mix of c). Throws kValidation when a
/// clustered point has an empty gate label.
std::optional<double> weighted_avg_entropy(std::span<const int> labels,
                                           std::span<const std::string> gate_labels);

/// Noise points become singleton clusters with fresh ids.
std::vector<int> noise_as_singletons(std::span<const int> labels);

/// Adjusted Rand index of two labelings (ids compared literally, so map
/// noise to singletons first when that is the intended reading).
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

struct PairScores {
  double precision = 0.0;  // co-clustered predicted pairs that are true pairs
  double recall = 0.0;     // true pairs that are co-clustered
  std::uint64_t predicted_pairs = 0;
  std::uint64_t true_pairs = 0;
};

/// Pair counting over non-noise points in `predicted` against `truth`.
PairScores pair_scores(std::span<const int> predicted, std::span<const int> truth);

struct Gate {
  std::string name;
  double x = 0.0;
  double y = 0.0;
};

/// Nearest gate to each trajectory's final point; ties go to the earlier gate.
std::vector<std::string> assign_gate_labels(std::span<const Trajectory> trajectories,
                                            std::span<const Gate> gates);

/// `gate_name,x,y`
void write_gates_csv(std::ostream& out, std::span<const Gate> gates);
std::vector<Gate> read_gates_csv(std::istream& in);

struct SweepConfig {
  double eps_from = 0.0;
  double eps_to = 0.2;
  double eps_step = 1e-4;
  std::size_t min_pts = 2;
  DistanceMetric metric = DistanceMetric::kCosine;
};

/// Number of epsilons, floor((to − from)/step) + 1, tolerant to rounding.
std::size_t sweep_length(const SweepConfig& config);
/// The i-th epsilon, rounded to 12 decimals so it prints cleanly.
double sweep_epsilon(const SweepConfig& config, std::size_t i);

struct MetricReport {
  double eps = 0.0;
  std::size_t n_clusters = 0;  // clusters with ≥ 2 members
  std::size_t n_noise = 0;     // noise plus members of smaller clusters
  std::optional<double> dbi;
  std::optional<double> silhouette;
  std::optional<double> wae;
};

struct SweepRow {
  MetricReport report;
  ClusterLabels labels;  // kept clusters only
};

/// Clusters `encodings` at every epsilon. DBI and silhouette are computed
/// on the L2-normalized encodings; `gate_labels` may be empty (no WAE).
std::vector<SweepRow> epsilon_sweep(const Points& encodings, const SweepConfig& config,
                                    std::span<const std::string> gate_labels);

/// `eps,n_clusters,n_noise,dbi,silhouette,wae`, NA for undefined values.
void write_sweep_csv(std::ostream& out, std::span<const MetricReport> rows);
std::vector<MetricReport> read_sweep_csv(std::istream& in);

}  // namespace tc
