// SPDX-License-Identifier: Apache-2.0
//
// Companion recovery scoring against ground truth, best-epsilon selection
// and the SVG/markdown renderings used by the report stage.
#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tc/cluster.hpp"

namespace tc {

struct CompanionRow {
  double eps = 0.0;
  std::size_t n_clusters = 0;
  double ari = 0.0;  // noise points count as singletons
  PairScores pairs;
};

/// Clusters at every sweep epsilon and scores against `truth`.
std::vector<CompanionRow> companion_curve(const Points& encodings, const SweepConfig& config,
                                          std::span<const int> truth);

/// Index of the highest ARI (earliest epsilon on ties).
std::size_t best_by_ari(std::span<const CompanionRow> rows);
/// Index of the most clusters (earliest epsilon on ties).
std::size_t best_by_clusters(std::span<const MetricReport> rows);

struct RunSummary {
  std::string label;
  double best_eps = 0.0;
  std::optional<double> ari;  // absent without ground truth
  std::optional<double> pair_precision;
  std::optional<double> pair_recall;
  std::size_t n_clusters = 0;
  std::size_t n_noise = 0;
  std::optional<double> dbi;
  std::optional<double> silhouette;
  std::optional<double> wae;
  std::optional<double> mean_wae;  // over epsilons where it is defined
};

/// Picks the ARI-best epsilon when `companions` is non-empty, otherwise
/// the epsilon with the most clusters, and reads the metrics there.
RunSummary summarize_run(const std::string& label, std::span<const MetricReport> sweep,
                         std::span<const CompanionRow> companions);

/// `key,value` rows.
void write_summary_csv(std::ostream& out, const RunSummary& s);
RunSummary read_summary_csv(std::istream& in, const std::string& label);
/// `eps,n_clusters,ari,pair_precision,pair_recall`
void write_companions_csv(std::ostream& out, std::span<const CompanionRow> rows);
/// `run,best_eps,ari,pair_precision,pair_recall,n_clusters,n_noise,dbi,silhouette,wae,mean_wae`
void write_comparison_csv(std::ostream& out, std::span<const RunSummary> runs);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<std::optional<double>> y;  // gaps where undefined
};

/// Self-contained SVG line chart; undefined values break the line.
std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, std::span<const Series> series);

struct BaselineRow {
  std::string method;
  std::size_t n_clusters = 0;
  std::size_t n_singles = 0;
};

/// Markdown report with the comparison and pattern-count tables.
std::string markdown_report(std::span<const RunSummary> runs, std::span<const BaselineRow> patterns);

}  // namespace tc
