// SPDX-License-Identifier: Apache-2.0
#include "tc/report.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "tc/error.hpp"
#include "text.hpp"

namespace tc {

namespace {

std::string opt(const std::optional<double>& v) { return v ? text::format_double(*v) : "NA"; }

std::string fixed(const std::optional<double>& v, int digits) {
  if (!v) return "NA";
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << *v;
  return s.str();
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << v;
  return s.str();
}

std::string tick(double v) {
  std::ostringstream s;
  s << std::defaultfloat;
  s.precision(4);
  s << v;
  return s.str();
}

}  // namespace

std::vector<CompanionRow> companion_curve(const Points& encodings, const SweepConfig& config,
                                          std::span<const int> truth) {
  require(truth.size() == encodings.size(), ErrorKind::kShape,
          "companion_curve: " + std::to_string(truth.size()) + " truth labels for " +
              std::to_string(encodings.size()) + " encodings");
  const auto dist = pairwise_distances(encodings, config.metric);
  const std::size_t count = sweep_length(config);
  std::vector<CompanionRow> rows;
  rows.reserve(count);
  std::vector<int> previous;
  for (std::size_t i = 0; i < count; ++i) {
    CompanionRow row;
    row.eps = sweep_epsilon(config, i);
    auto kept = keep_clusters(dbscan(dist, row.eps, config.min_pts).labels);
    if (!rows.empty() && kept.labels == previous) {
      row = rows.back();
      row.eps = sweep_epsilon(config, i);
      rows.push_back(row);
      continue;
    }
    row.n_clusters = static_cast<std::size_t>(kept.n_clusters);
    row.ari = adjusted_rand_index(noise_as_singletons(kept.labels), truth);
    row.pairs = pair_scores(kept.labels, truth);
    rows.push_back(row);
    previous = std::move(kept.labels);
  }
  return rows;
}

std::size_t best_by_ari(std::span<const CompanionRow> rows) {
  require(!rows.empty(), ErrorKind::kInvalidArgument, "best_by_ari: no rows");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].ari > rows[best].ari) best = i;
  return best;
}

std::size_t best_by_clusters(std::span<const MetricReport> rows) {
  require(!rows.empty(), ErrorKind::kInvalidArgument, "best_by_clusters: no rows");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].n_clusters > rows[best].n_clusters) best = i;
  return best;
}

RunSummary summarize_run(const std::string& label, std::span<const MetricReport> sweep,
                         std::span<const CompanionRow> companions) {
  require(!sweep.empty(), ErrorKind::kInvalidArgument, "summarize_run: empty sweep");
  require(companions.empty() || companions.size() == sweep.size(), ErrorKind::kShape,
          "summarize_run: companion rows do not match the sweep");
  RunSummary s;
  s.label = label;
  std::size_t idx;
  if (!companions.empty()) {
    idx = best_by_ari(companions);
    s.ari = companions[idx].ari;
    s.pair_precision = companions[idx].pairs.precision;
    s.pair_recall = companions[idx].pairs.recall;
  } else {
    idx = best_by_clusters(sweep);
  }
  const auto& r = sweep[idx];
  s.best_eps = r.eps;
  s.n_clusters = r.n_clusters;
  s.n_noise = r.n_noise;
  s.dbi = r.dbi;
  s.silhouette = r.silhouette;
  s.wae = r.wae;
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& row : sweep) {
    if (row.wae) {
      total += *row.wae;
      ++n;
    }
  }
  if (n) s.mean_wae = total / static_cast<double>(n);
  return s;
}

void write_summary_csv(std::ostream& out, const RunSummary& s) {
  out << "key,value\n";
  out << "best_eps," << text::format_double(s.best_eps) << '\n';
  out << "ari," << opt(s.ari) << '\n';
  out << "pair_precision," << opt(s.pair_precision) << '\n';
  out << "pair_recall," << opt(s.pair_recall) << '\n';
  out << "n_clusters," << s.n_clusters << '\n';
  out << "n_noise," << s.n_noise << '\n';
  out << "dbi," << opt(s.dbi) << '\n';
  out << "silhouette," << opt(s.silhouette) << '\n';
  out << "wae," << opt(s.wae) << '\n';
  out << "mean_wae," << opt(s.mean_wae) << '\n';
}

RunSummary read_summary_csv(std::istream& in, const std::string& label) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || (line_no == 1 && body == "key,value")) continue;
    const auto f = text::split(body, ',');
    require(f.size() == 2, ErrorKind::kParse,
            "summary line " + std::to_string(line_no) + ": expected key,value");
    kv[std::string(f[0])] = std::string(f[1]);
  }
  const auto need = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    require(it != kv.end(), ErrorKind::kParse, "summary lacks '" + key + "'");
    return it->second;
  };
  const auto real = [&](const std::string& key) -> std::optional<double> {
    const auto& v = need(key);
    if (v == "NA") return std::nullopt;
    const auto d = text::parse_double(v);
    require(d.has_value(), ErrorKind::kParse, "summary value for '" + key + "' is malformed");
    return d;
  };
  const auto count = [&](const std::string& key) {
    const auto n = text::parse_int(need(key));
    require(n && *n >= 0, ErrorKind::kParse, "summary value for '" + key + "' is malformed");
    return static_cast<std::size_t>(*n);
  };
  RunSummary s;
  s.label = label;
  const auto eps = real("best_eps");
  require(eps.has_value(), ErrorKind::kParse, "summary best_eps is NA");
  s.best_eps = *eps;
  s.ari = real("ari");
  s.pair_precision = real("pair_precision");
  s.pair_recall = real("pair_recall");
  s.n_clusters = count("n_clusters");
  s.n_noise = count("n_noise");
  s.dbi = real("dbi");
  s.silhouette = real("silhouette");
  s.wae = real("wae");
  s.mean_wae = real("mean_wae");
  return s;
}

void write_companions_csv(std::ostream& out, std::span<const CompanionRow> rows) {
  out << "eps,n_clusters,ari,pair_precision,pair_recall\n";
  for (const auto& r : rows) {
    out << text::format_double(r.eps) << ',' << r.n_clusters << ',' << text::format_double(r.ari)
        << ',' << text::format_double(r.pairs.precision) << ','
        << text::format_double(r.pairs.recall) << '\n';
  }
}

void write_comparison_csv(std::ostream& out, std::span<const RunSummary> runs) {
  out << "run,best_eps,ari,pair_precision,pair_recall,n_clusters,n_noise,dbi,silhouette,wae,"
         "mean_wae\n";
  for (const auto& s : runs) {
    out << s.label << ',' << text::format_double(s.best_eps) << ',' << opt(s.ari) << ','
        << opt(s.pair_precision) << ',' << opt(s.pair_recall) << ',' << s.n_clusters << ','
        << s.n_noise << ',' << opt(s.dbi) << ',' << opt(s.silhouette) << ',' << opt(s.wae) << ','
        << opt(s.mean_wae) << '\n';
  }
}

std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, std::span<const Series> series) {
  constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
  const double pw = kW - kLeft - kRight;
  const double ph = kH - kTop - kBottom;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool any = false;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!s.y[i] || !std::isfinite(*s.y[i])) continue;
      if (!any) {
        x0 = x1 = s.x[i];
        y0 = y1 = *s.y[i];
        any = true;
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, *s.y[i]);
      y1 = std::max(y1, *s.y[i]);
    }
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  const auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };
  static const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                        "#8c564b"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << escape_xml(title) << "</text>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << num(pw) << "\" height=\""
      << num(ph) << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x0 + (x1 - x0) * t / 4.0;
    const double yv = y0 + (y1 - y0) * t / 4.0;
    svg << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(kTop + ph + 16)
        << "\" text-anchor=\"middle\">" << tick(xv) << "</text>\n";
    svg << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(py(yv) + 4)
        << "\" text-anchor=\"end\">" << tick(yv) << "</text>\n";
    svg << "<line x1=\"" << num(kLeft) << "\" x2=\"" << num(kLeft + pw) << "\" y1=\"" << num(py(yv))
        << "\" y2=\"" << num(py(yv)) << "\" stroke=\"#eee\"/>\n";
  }
  svg << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kH - 10)
      << "\" text-anchor=\"middle\">" << escape_xml(x_label) << "</text>\n";
  svg << "<text transform=\"translate(16," << num(kTop + ph / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape_xml(y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % std::size(kColors)];
    std::string path;
    bool pen_down = false;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!s.y[i] || !std::isfinite(*s.y[i])) {
        pen_down = false;
        continue;
      }
      path += pen_down ? " L" : " M";
      path += num(px(s.x[i])) + ' ' + num(py(*s.y[i]));
      pen_down = true;
    }
    if (!path.empty())
      svg << "<path d=\"" << path.substr(1) << "\" fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1.5\"/>\n";
    const double ly = kTop + 14 + 18.0 * static_cast<double>(k);
    svg << "<line x1=\"" << num(kLeft + pw + 12) << "\" x2=\"" << num(kLeft + pw + 32) << "\" y1=\""
        << num(ly - 4) << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << num(kLeft + pw + 38) << "\" y=\"" << num(ly) << "\">"
        << escape_xml(s.label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string markdown_report(std::span<const RunSummary> runs, std::span<const BaselineRow> patterns) {
  std::ostringstream md;
  md << "# Traveling companion report\n\n";
  md << "## Encodings at the selected epsilon\n\n";
  md << "| run | eps | ARI | pair precision | pair recall | clusters | single | DBI | Silhouette | WAE | mean WAE |\n";
  md << "|---|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& s : runs) {
    md << "| " << s.label << " | " << text::format_double(s.best_eps) << " | " << fixed(s.ari, 4)
       << " | " << fixed(s.pair_precision, 4) << " | " << fixed(s.pair_recall, 4) << " | "
       << s.n_clusters << " | " << s.n_noise << " | " << fixed(s.dbi, 4) << " | "
       << fixed(s.silhouette, 4) << " | " << fixed(s.wae, 4) << " | " << fixed(s.mean_wae, 4)
       << " |\n";
  }
  md << "\nThe epsilon maximizes ARI against the planted groups when ground truth is present, "
        "otherwise it maximizes the cluster count. WAE is the weighted average gate entropy.\n";
  if (!patterns.empty()) {
    md << "\n## Clusters and single trajectories\n\n";
    md << "| method | clusters | single trajectories |\n|---|---|---|\n";
    for (const auto& s : runs) md << "| " << s.label << " | " << s.n_clusters << " | " << s.n_noise << " |\n";
    for (const auto& p : patterns)
      md << "| " << p.method << " | " << p.n_clusters << " | " << p.n_singles << " |\n";
  }
  return md.str();
}

}  // namespace tc
