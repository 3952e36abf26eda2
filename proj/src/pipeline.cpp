// SPDX-License-Identifier: Apache-2.0
#include "tc/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <unordered_map>

#include "tc/error.hpp"
#include "tc/report.hpp"
#include "text.hpp"

namespace tc {

namespace fs = std::filesystem;

namespace {

constexpr int kManifestFormat = 1;

struct Paths {
  fs::path dir;
  fs::path trajectories, ground_truth, gates, grid, tokens;
  fs::path cells_bin, cells_csv, embed_loss;
  fs::path groups;
  fs::path model, loss_history;
  fs::path encodings;
  fs::path sweep;
  fs::path convoys, swarms, convoy_summary, swarm_summary;
  fs::path report;

  explicit Paths(const RunContext& ctx) : dir(ctx.dir) {
    const auto& c = ctx.config;
    const auto data = dir / "data";
    trajectories = c.input_trajectories.empty() ? data / "trajectories.csv" : fs::path(c.input_trajectories);
    ground_truth = c.input_ground_truth.empty() ? data / "ground_truth.csv" : fs::path(c.input_ground_truth);
    gates = c.input_gates.empty() ? data / "gates.csv" : fs::path(c.input_gates);
    grid = data / "grid.csv";
    tokens = data / "tokens.csv";
    cells_bin = dir / "embeddings" / "cells.bin";
    cells_csv = dir / "embeddings" / "cells.csv";
    embed_loss = dir / "embeddings" / "loss.csv";
    groups = dir / "groups" / "groups.csv";
    model = dir / "model" / "model.ckpt";
    loss_history = dir / "model" / "loss_history.csv";
    encodings = dir / "encodings" / "encodings.csv";
    sweep = dir / "sweep" / "sweep.csv";
    convoys = dir / "baselines" / "convoys.csv";
    swarms = dir / "baselines" / "swarms.csv";
    convoy_summary = dir / "baselines" / "convoy_summary.csv";
    swarm_summary = dir / "baselines" / "swarm_summary.csv";
    report = dir / "report";
  }
};

void log(const RunContext& ctx, const std::string& msg) {
  if (ctx.log) ctx.log(msg);
}

void need(const fs::path& path, const char* producer) {
  require(fs::exists(path), ErrorKind::kMissingArtifact,
          "missing " + path.string() + " (run `" + producer + "` first)");
}

std::ofstream open_out(const fs::path& path, bool binary = false) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  require(out.good(), ErrorKind::kIo, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::kIo, "cannot read " + path.string());
  return in;
}

void write_text(const fs::path& path, const std::string& body) {
  auto out = open_out(path, true);
  out << body;
  require(out.good(), ErrorKind::kIo, "failed writing " + path.string());
}

std::string display_path(const fs::path& path, const fs::path& base) {
  const auto rel = path.lexically_relative(base);
  return rel.empty() || *rel.begin() == ".." ? path.string() : rel.generic_string();
}

void write_manifest(const RunContext& ctx, const std::string& stage,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  const auto config = ctx.config.canonical();
  std::ostringstream m;
  m << "stage = " << stage << '\n';
  m << "format = " << kManifestFormat << '\n';
  m << "config_sha256 = " << sha256_bytes(config) << '\n';
  for (const auto& p : inputs) m << "input " << display_path(p, ctx.dir) << ' ' << sha256_file(p) << '\n';
  for (const auto& p : outputs) m << "output " << display_path(p, ctx.dir) << ' ' << sha256_file(p) << '\n';
  m << "[config]\n" << config;
  write_text(ctx.dir / "manifest" / (stage + ".txt"), m.str());
}

// ---- loaders ---------------------------------------------------------------

std::vector<Trajectory> load_run_trajectories(const RunContext&, const Paths& p) {
  need(p.trajectories, "synth or ingest");
  return load_trajectories(p.trajectories);
}

void write_grid_csv(const fs::path& path, const Grid& g) {
  auto out = open_out(path);
  out << "origin_x,origin_y,cell_len,n_cols,n_rows\n"
      << text::format_double(g.origin_x) << ',' << text::format_double(g.origin_y) << ','
      << text::format_double(g.cell_len) << ',' << g.n_cols << ',' << g.n_rows << '\n';
}

Grid read_grid_csv(const fs::path& path) {
  need(path, "ingest");
  auto in = open_in(path);
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  const auto f = text::split(text::trim(line), ',');
  require(f.size() == 5, ErrorKind::kParse, path.string() + ": expected 5 grid fields");
  const auto ox = text::parse_double(f[0]);
  const auto oy = text::parse_double(f[1]);
  const auto len = text::parse_double(f[2]);
  const auto nc = text::parse_int(f[3]);
  const auto nr = text::parse_int(f[4]);
  require(ox && oy && len && nc && nr && *len > 0 && *nc >= 1 && *nr >= 1, ErrorKind::kParse,
          path.string() + ": malformed grid");
  return {*ox, *oy, *len, static_cast<std::int32_t>(*nc), static_cast<std::int32_t>(*nr)};
}

std::vector<std::string> ids_of(std::span<const Trajectory> trajectories) {
  std::vector<std::string> ids;
  for (const auto& t : trajectories) ids.push_back(t.id);
  return ids;
}

std::vector<TokenSeq> tokenize_all(std::span<const Trajectory> trajectories, const Grid& grid) {
  std::vector<TokenSeq> out;
  out.reserve(trajectories.size());
  for (const auto& t : trajectories) out.push_back(tokenize(t, grid));
  return out;
}

std::vector<VecSeq> model_inputs(const RunContext& ctx, const Paths& p,
                                 std::span<const Trajectory> trajectories) {
  const auto grid = read_grid_csv(p.grid);
  need(p.cells_bin, "pretrain");
  const auto table = load_embedding_table(p.cells_bin);
  require(table.n_cells == static_cast<std::size_t>(grid.cell_count()), ErrorKind::kValidation,
          "embedding table has " + std::to_string(table.n_cells) + " cells but the grid has " +
              std::to_string(grid.cell_count()) + "; rerun pretrain");
  const auto encoder = PosEncoder::for_dataset(trajectories, table.d_cell);
  std::vector<VecSeq> out;
  out.reserve(trajectories.size());
  for (const auto& tr : trajectories)
    out.push_back(embed_trajectory(tokenize(tr, grid), table,
                                   ctx.config.positional_encoding ? &encoder : nullptr));
  return out;
}

Points load_encoding_points(const Paths& p, std::span<const Trajectory> trajectories) {
  need(p.encodings, "encode");
  auto in = open_in(p.encodings);
  const auto encodings = read_encodings_csv(in);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < encodings.size(); ++i) index.emplace(encodings[i].id, i);
  Points out;
  for (const auto& tr : trajectories) {
    const auto it = index.find(tr.id);
    require(it != index.end(), ErrorKind::kValidation,
            "trajectory '" + tr.id + "' has no encoding; rerun encode");
    out.push_back(encodings[it->second].h);
  }
  return out;
}

std::vector<std::string> gate_labels(const Paths& p, std::span<const Trajectory> trajectories) {
  if (!fs::exists(p.gates)) return {};
  auto in = open_in(p.gates);
  const auto gates = read_gates_csv(in);
  return assign_gate_labels(trajectories, gates);
}

// ---- stages ----------------------------------------------------------------

void stage_synth(const RunContext& ctx) {
  const Paths p(ctx);
  const auto corpus = generate(ctx.config.resolved_synth());
  const auto data = ctx.dir / "data";
  const auto traj = data / "trajectories.csv";
  const auto truth = data / "ground_truth.csv";
  const auto gates = data / "gates.csv";
  {
    auto out = open_out(traj);
    write_trajectories(out, corpus.trajectories);
  }
  {
    auto out = open_out(truth);
    write_ground_truth_csv(out, corpus.truth);
  }
  {
    auto out = open_out(gates);
    write_gates_csv(out, corpus.gates);
  }
  log(ctx, "synth: " + std::to_string(corpus.trajectories.size()) + " trajectories, " +
               std::to_string(corpus.gates.size()) + " gates");
  write_manifest(ctx, "synth", {}, {traj, truth, gates});
}

void stage_ingest(const RunContext& ctx) {
  const Paths p(ctx);
  need(p.trajectories, "synth");
  std::size_t warnings = 0;
  const auto trajectories = load_trajectories(p.trajectories, [&](const std::string& w) {
    ++warnings;
    log(ctx, "ingest: warning: " + w);
  });
  require(!trajectories.empty(), ErrorKind::kValidation, p.trajectories.string() + " holds no trajectories");
  const auto grid = build_grid(trajectories, ctx.config.cell_len);
  const auto canonical = ctx.dir / "data" / "trajectories.csv";
  std::vector<fs::path> inputs;
  if (fs::absolute(p.trajectories).lexically_normal() != fs::absolute(canonical).lexically_normal()) {
    inputs.push_back(p.trajectories);
    auto out = open_out(canonical);
    write_trajectories(out, trajectories);
  }
  write_grid_csv(p.grid, grid);
  {
    auto out = open_out(p.tokens);
    out << "traj_id,t,cell\n";
    for (const auto& tr : trajectories)
      for (const auto& tok : tokenize(tr, grid).tokens) out << tr.id << ',' << tok.t << ',' << tok.cell << '\n';
  }
  log(ctx, "ingest: " + std::to_string(trajectories.size()) + " trajectories, grid " +
               std::to_string(grid.n_cols) + "x" + std::to_string(grid.n_rows) + " (" +
               std::to_string(grid.cell_count()) + " cells)");
  write_manifest(ctx, "ingest", inputs, {canonical, p.grid, p.tokens});
}

// Later stages read the run's canonical trajectory copy written by ingest.
RunContext canonical_ctx(const RunContext& ctx) {
  RunContext c = ctx;
  c.config.input_trajectories.clear();
  return c;
}

void stage_pretrain(const RunContext& in_ctx) {
  const auto ctx = canonical_ctx(in_ctx);
  const Paths p(ctx);
  const auto trajectories = load_run_trajectories(ctx, p);
  const auto grid = read_grid_csv(p.grid);
  const auto corpus = tokenize_all(trajectories, grid);
  const auto result = train_skipgram(corpus, static_cast<std::size_t>(grid.cell_count()),
                                     ctx.config.resolved_skipgram());
  fs::create_directories(p.cells_bin.parent_path());
  save_embedding_table(p.cells_bin, result.table);
  {
    auto out = open_out(p.cells_csv);
    write_embedding_csv(out, result.table);
  }
  {
    auto out = open_out(p.embed_loss);
    out << "epoch,loss\n";
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
      out << e + 1 << ',' << text::format_double(result.epoch_loss[e]) << '\n';
  }
  if (!result.epoch_loss.empty())
    log(ctx, "pretrain: final skip-gram loss " + text::format_double(result.epoch_loss.back()));
  write_manifest(ctx, "pretrain", {p.trajectories, p.grid}, {p.cells_bin, p.cells_csv, p.embed_loss});
}

void stage_pack(const RunContext& in_ctx) {
  const auto ctx = canonical_ctx(in_ctx);
  const Paths p(ctx);
  const auto trajectories = load_run_trajectories(ctx, p);
  std::vector<TrajPoint3D> points;
  for (std::size_t i = 0; i < trajectories.size(); ++i) points.push_back(summarize(trajectories[i], i));
  if (ctx.config.pack_normalize) points = normalize_axes(points);
  const auto groups = str_pack(points, ctx.config.pack_capacity);
  {
    auto out = open_out(p.groups);
    write_groups_csv(out, groups, ids_of(trajectories));
  }
  log(ctx, "pack: " + std::to_string(groups.groups.size()) + " groups");
  write_manifest(ctx, "pack", {p.trajectories}, {p.groups});
}

void stage_train(const RunContext& in_ctx) {
  const auto ctx = canonical_ctx(in_ctx);
  const Paths p(ctx);
  const auto trajectories = load_run_trajectories(ctx, p);
  need(p.groups, "pack");
  const auto inputs = model_inputs(ctx, p, trajectories);
  auto gin = open_in(p.groups);
  const auto groups = read_groups_csv(gin, ids_of(trajectories), ctx.config.pack_capacity);
  const auto result = train(groups, inputs, ctx.config.resolved_train(), [&](const EpochStats& s) {
    std::string msg = "train: epoch " + std::to_string(s.epoch) + " l_rec " + text::format_double(s.l_rec);
    if (s.l_sim) msg += " l_sim " + text::format_double(*s.l_sim);
    log(ctx, msg);
  });
  fs::create_directories(p.model.parent_path());
  save_model(p.model, result.params);
  {
    auto out = open_out(p.loss_history);
    write_loss_history_csv(out, result.history);
  }
  write_manifest(ctx, "train", {p.trajectories, p.grid, p.cells_bin, p.groups}, {p.model, p.loss_history});
}

void stage_encode(const RunContext& in_ctx) {
  const auto ctx = canonical_ctx(in_ctx);
  const Paths p(ctx);
  const auto trajectories = load_run_trajectories(ctx, p);
  need(p.model, "train");
  const auto params = load_model(p.model);
  const auto inputs = model_inputs(ctx, p, trajectories);
  const auto encodings = encode_all(inputs, params);
  {
    auto out = open_out(p.encodings);
    write_encodings_csv(out, encodings);
  }
  log(ctx, "encode: " + std::to_string(encodings.size()) + " encodings");
  write_manifest(ctx, "encode", {p.trajectories, p.grid, p.cells_bin, p.model}, {p.encodings});
}

void stage_sweep(const RunContext& in_ctx) {
  const auto ctx = canonical_ctx(in_ctx);
  const Paths p(ctx);
  const auto trajectories = load_run_trajectories(ctx, p);
  const auto points = load_encoding_points(p, trajectories);
  const auto gates = gate_labels(p, trajectories);
  if (gates.empty()) log(ctx, "sweep: no gates file, WAE column will be NA");
  const auto rows = epsilon_sweep(points, ctx.config.sweep, gates);
  std::vector<MetricReport> reports;
  for (const auto& r : rows) reports.push_back(r.report);
  {
    auto out = open_out(p.sweep);
    write_sweep_csv(out, reports);
  }
  log(ctx, "sweep: " + std::to_string(reports.size()) + " epsilons");
  std::vector<fs::path> inputs{p.trajectories, p.encodings};
  if (fs::exists(p.gates)) inputs.push_back(p.gates);
  write_manifest(ctx, "sweep", inputs, {p.sweep});
}

template <typename Pattern>
void write_pattern_summary(const fs::path& path, std::span<const Pattern> patterns, std::size_t n_objects) {
  std::vector<std::vector<std::size_t>> sets;
  for (const auto& pat : patterns) sets.push_back(pat.objects);
  const auto summary = companion_report(sets, n_objects);
  auto out = open_out(path);
  out << "n_clusters,n_singles\n" << summary.n_clusters << ',' << summary.n_singles << '\n';
}

void stage_baseline(const RunContext& in_ctx, bool convoy) {
  const auto ctx = canonical_ctx(in_ctx);
  const Paths p(ctx);
  const auto trajectories = load_run_trajectories(ctx, p);
  const auto snapshots = build_snapshots(trajectories, ctx.config.baseline_step);
  const auto timeline = cluster_timeline(snapshots, trajectories.size(), ctx.config.pattern);
  const auto ids = ids_of(trajectories);
  if (convoy) {
    const auto found = mine_convoys(timeline, ctx.config.pattern);
    {
      auto out = open_out(p.convoys);
      write_convoys_csv(out, found, ids);
    }
    write_pattern_summary<Convoy>(p.convoy_summary, found, trajectories.size());
    log(ctx, "baseline-convoy: " + std::to_string(found.size()) + " convoys");
    write_manifest(ctx, "baseline-convoy", {p.trajectories}, {p.convoys, p.convoy_summary});
  } else {
    const auto found = mine_swarms(timeline, ctx.config.pattern);
    {
      auto out = open_out(p.swarms);
      write_swarms_csv(out, found, ids);
    }
    write_pattern_summary<Swarm>(p.swarm_summary, found, trajectories.size());
    log(ctx, "baseline-swarm: " + std::to_string(found.size()) + " closed swarms");
    write_manifest(ctx, "baseline-swarm", {p.trajectories}, {p.swarms, p.swarm_summary});
  }
}

std::optional<BaselineRow> read_baseline_summary(const fs::path& path, const std::string& method) {
  if (!fs::exists(path)) return std::nullopt;
  auto in = open_in(path);
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  const auto f = text::split(text::trim(line), ',');
  require(f.size() == 2, ErrorKind::kParse, path.string() + ": expected n_clusters,n_singles");
  const auto a = text::parse_int(f[0]);
  const auto b = text::parse_int(f[1]);
  require(a && b && *a >= 0 && *b >= 0, ErrorKind::kParse, path.string() + ": malformed counts");
  return BaselineRow{method, static_cast<std::size_t>(*a), static_cast<std::size_t>(*b)};
}

std::vector<MetricReport> load_sweep(const fs::path& dir) {
  const auto path = dir / "sweep" / "sweep.csv";
  need(path, "sweep");
  auto in = open_in(path);
  return read_sweep_csv(in);
}

Series metric_series(const std::string& label, std::span<const MetricReport> rows,
                     std::optional<double> MetricReport::*member) {
  Series s{label, {}, {}};
  for (const auto& r : rows) {
    s.x.push_back(r.eps);
    s.y.push_back(r.*member);
  }
  return s;
}

}  // namespace

std::string sha256_bytes(const std::string& bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> md(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  require(md != nullptr, ErrorKind::kIo, "sha256: cannot allocate digest context");
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  require(EVP_DigestInit_ex(md.get(), EVP_sha256(), nullptr) == 1 &&
              EVP_DigestUpdate(md.get(), bytes.data(), bytes.size()) == 1 &&
              EVP_DigestFinal_ex(md.get(), digest, &len) == 1,
          ErrorKind::kIo, "sha256: digest failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return hex.str();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kIo, "cannot hash " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_bytes(buf.str());
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {
      "synth", "ingest",          "pretrain",       "pack",  "train", "encode",
      "sweep", "baseline-convoy", "baseline-swarm", "report"};
  return names;
}

void run_stage(const RunContext& ctx, const std::string& stage) {
  ctx.config.validate();
  fs::create_directories(ctx.dir);
  if (stage == "synth") return stage_synth(ctx);
  if (stage == "ingest") return stage_ingest(ctx);
  if (stage == "pretrain") return stage_pretrain(ctx);
  if (stage == "pack") return stage_pack(ctx);
  if (stage == "train") return stage_train(ctx);
  if (stage == "encode") return stage_encode(ctx);
  if (stage == "sweep") return stage_sweep(ctx);
  if (stage == "baseline-convoy") return stage_baseline(ctx, true);
  if (stage == "baseline-swarm") return stage_baseline(ctx, false);
  if (stage == "report") return run_report(ctx, {});
  fail(ErrorKind::kInvalidArgument, "unknown stage '" + stage + "'");
}

void run_report(const RunContext& in_ctx, std::span<const ComparedRun> others) {
  in_ctx.config.validate();
  const auto ctx = canonical_ctx(in_ctx);
  const Paths p(ctx);
  const auto trajectories = load_run_trajectories(ctx, p);
  const auto sweep = load_sweep(ctx.dir);
  std::vector<fs::path> inputs{p.trajectories, ctx.dir / "sweep" / "sweep.csv"};
  std::vector<fs::path> outputs;

  std::vector<CompanionRow> companions;
  if (fs::exists(p.ground_truth)) {
    auto in = open_in(p.ground_truth);
    const auto truth = truth_labels(read_ground_truth_csv(in), ids_of(trajectories));
    const auto points = load_encoding_points(p, trajectories);
    companions = companion_curve(points, ctx.config.sweep, truth);
    require(companions.size() == sweep.size(), ErrorKind::kValidation,
            "sweep.csv does not match the configured sweep range; rerun sweep");
    inputs.push_back(p.ground_truth);
    inputs.push_back(p.encodings);
    const auto path = p.report / "companions.csv";
    auto out = open_out(path);
    write_companions_csv(out, companions);
    outputs.push_back(path);
  } else {
    log(ctx, "report: no ground truth, selecting epsilon by cluster count");
  }

  const auto label = ctx.dir.filename().string().empty() ? std::string("run") : ctx.dir.filename().string();
  std::vector<RunSummary> runs{summarize_run(label, sweep, companions)};
  {
    const auto path = p.report / "summary.csv";
    auto out = open_out(path);
    write_summary_csv(out, runs.front());
    outputs.push_back(path);
  }

  std::vector<std::vector<MetricReport>> curves{sweep};
  for (const auto& other : others) {
    const auto summary_path = other.dir / "report" / "summary.csv";
    need(summary_path, "report");
    auto in = open_in(summary_path);
    runs.push_back(read_summary_csv(in, other.label));
    curves.push_back(load_sweep(other.dir));
    inputs.push_back(summary_path);
    inputs.push_back(other.dir / "sweep" / "sweep.csv");
  }
  if (!others.empty()) runs.front().label = label;

  std::vector<BaselineRow> patterns;
  if (auto row = read_baseline_summary(p.convoy_summary, "Convoy")) {
    patterns.push_back(*row);
    inputs.push_back(p.convoy_summary);
  }
  if (auto row = read_baseline_summary(p.swarm_summary, "Swarm")) {
    patterns.push_back(*row);
    inputs.push_back(p.swarm_summary);
  }

  {
    const auto path = p.report / "comparison.csv";
    auto out = open_out(path);
    write_comparison_csv(out, runs);
    outputs.push_back(path);
  }
  const struct {
    const char* file;
    const char* title;
    std::optional<double> MetricReport::*member;
  } charts[] = {{"dbi.svg", "Davies-Bouldin index", &MetricReport::dbi},
                {"silhouette.svg", "Silhouette coefficient", &MetricReport::silhouette},
                {"wae.svg", "Weighted average entropy", &MetricReport::wae}};
  for (const auto& chart : charts) {
    std::vector<Series> series;
    for (std::size_t i = 0; i < runs.size(); ++i)
      series.push_back(metric_series(runs[i].label, curves[i], chart.member));
    const auto path = p.report / chart.file;
    write_text(path, svg_line_chart(chart.title, "epsilon", chart.title, series));
    outputs.push_back(path);
  }
  if (!companions.empty()) {
    Series ari{label, {}, {}};
    for (const auto& c : companions) {
      ari.x.push_back(c.eps);
      ari.y.push_back(c.ari);
    }
    const auto path = p.report / "ari.svg";
    write_text(path, svg_line_chart("Adjusted Rand index", "epsilon", "ARI", std::span(&ari, 1)));
    outputs.push_back(path);
  }
  {
    const auto path = p.report / "report.md";
    write_text(path, markdown_report(runs, patterns));
    outputs.push_back(path);
  }
  log(ctx, "report: best eps " + text::format_double(runs.front().best_eps) + ", " +
               std::to_string(runs.front().n_clusters) + " clusters" +
               (runs.front().ari ? ", ARI " + text::format_double(*runs.front().ari) : std::string()));
  write_manifest(ctx, "report", inputs, outputs);
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"main", "pe-ablation", "baselines"};
  return names;
}

namespace {

void full_model_run(const RunContext& ctx, bool with_synth) {
  if (with_synth) run_stage(ctx, "synth");
  for (const char* stage : {"ingest", "pretrain", "pack", "train", "encode", "sweep"})
    run_stage(ctx, stage);
}

RunContext sub_run(const RunContext& ctx, const std::string& name) {
  RunContext sub = ctx;
  sub.dir = ctx.dir / name;
  if (ctx.log) sub.log = [log = ctx.log, name](const std::string& m) { log("[" + name + "] " + m); };
  return sub;
}

// Points a sub-run at another sub-run's corpus.
void share_data(RunContext& sub, const RunContext& source) {
  const auto data = source.dir / "data";
  sub.config.input_trajectories = (data / "trajectories.csv").string();
  sub.config.input_ground_truth = (data / "ground_truth.csv").string();
  sub.config.input_gates = (data / "gates.csv").string();
}

}  // namespace

void run_experiment(const RunContext& ctx, const std::string& name) {
  ctx.config.validate();
  fs::create_directories(ctx.dir);
  if (name == "main" || name == "pe-ablation") {
    const bool ablation = name == "pe-ablation";
    auto first = sub_run(ctx, ablation ? "pe_on" : "attn_mean");
    auto second = sub_run(ctx, ablation ? "pe_off" : "lstm_ae");
    if (ablation) {
      first.config.synth.clone_groups = true;
      first.config.positional_encoding = true;
      second.config.synth.clone_groups = true;
      second.config.positional_encoding = false;
    } else {
      first.config.train.similarity_path = true;
      second.config.train.similarity_path = false;
    }
    full_model_run(first, true);
    share_data(second, first);
    full_model_run(second, false);
    run_report(second, {});
    const ComparedRun others[] = {{second.dir.filename().string(), second.dir}};
    run_report(first, others);
    return;
  }
  if (name == "baselines") {
    auto run = sub_run(ctx, "attn_mean");
    full_model_run(run, true);
    run_stage(run, "baseline-convoy");
    run_stage(run, "baseline-swarm");
    run_report(run, {});
    return;
  }
  fail(ErrorKind::kInvalidArgument, "unknown experiment '" + name + "' (main|pe-ablation|baselines)");
}

}  // namespace tc
