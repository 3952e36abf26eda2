// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits with the number of failures.
//
//   acceptance --work DIR [--only 1,2,...]
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "tc/baselines.hpp"
#include "tc/cluster.hpp"
#include "tc/embed.hpp"
#include "tc/pipeline.hpp"
#include "tc/strpack.hpp"

namespace fs = std::filesystem;
using namespace tc;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::map<std::string, std::string> read_summary(const fs::path& run) {
  std::map<std::string, std::string> out;
  for (const auto& row : read_csv(run / "report" / "summary.csv"))
    if (row.size() == 2) out[row[0]] = row[1];
  return out;
}

std::optional<double> number(const std::string& s) {
  if (s == "NA" || s.empty()) return std::nullopt;
  return std::stod(s);
}

// Total loss per epoch from model/loss_history.csv.
std::vector<double> total_loss(const fs::path& run, double lambda) {
  std::vector<double> out;
  const auto rows = read_csv(run / "model" / "loss_history.csv");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    double v = std::stod(rows[i][1]);
    if (rows[i].size() > 2 && !rows[i][2].empty()) v += lambda * std::stod(rows[i][2]);
    out.push_back(v);
  }
  return out;
}

RunContext context(const fs::path& dir, std::uint64_t seed) {
  RunContext ctx;
  ctx.dir = dir;
  ctx.config.seed = seed;
  ctx.log = [name = dir.parent_path().filename().string() + "/" + dir.filename().string()](
                const std::string& line) { std::fprintf(stderr, "  [%s] %s\n", name.c_str(), line.c_str()); };
  return ctx;
}

// ---- 1 --------------------------------------------------------------------

Outcome gradients() {
  const auto start = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  std::size_t checked = 0;
  auto cases = testing::op_cases();
  auto batch = std::make_shared<testing::ToyBatch>(testing::toy_batch());
  cases.push_back(testing::model_loss_case(batch, true));
  cases.push_back(testing::model_loss_case(batch, false));
  for (auto& c : cases) {
    const auto r = testing::check_gradients(c);
    checked += r.checked;
    if (r.max_rel >= worst) {
      worst = r.max_rel;
      worst_name = c.name;
    }
  }
  const double secs = seconds_since(start);
  return {worst < 1e-4 && secs < 10.0,
          std::to_string(cases.size()) + " cases, " + std::to_string(checked) +
              " entries, max rel error " + fmt(worst, 3) + " (" + worst_name + "), " + fmt(secs, 3) + " s"};
}

// ---- 2 --------------------------------------------------------------------

Outcome oracles() {
  std::mt19937_64 rng(4242);
  std::size_t dbscan_ok = 0, str_ok = 0, pattern_ok = 0;

  std::uniform_int_distribution<std::size_t> n_dist(2, 200), m_dist(1, 6);
  std::uniform_real_distribution<double> u(-1.0, 1.0), eps_dist(0.0, 0.8);
  std::uniform_int_distribution<int> blob(0, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = n_dist(rng);
    Points pts(n, std::vector<double>(3));
    for (auto& row : pts) {
      const double c = blob(rng);
      for (auto& v : row) v = c + 0.3 * u(rng);
    }
    const auto metric = trial % 2 ? DistanceMetric::kCosine : DistanceMetric::kEuclidean;
    const double eps = metric == DistanceMetric::kCosine ? eps_dist(rng) / 4 : eps_dist(rng);
    const auto min_pts = m_dist(rng);
    const auto dist = pairwise_distances(pts, metric);
    if (dbscan(dist, eps, min_pts).labels == testing::dbscan_oracle(dist, eps, min_pts)) ++dbscan_ok;
  }

  std::uniform_int_distribution<std::size_t> pts_dist(1, 500), cap_dist(1, 70);
  std::uniform_int_distribution<int> coarse(0, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = pts_dist(rng);
    std::vector<TrajPoint3D> pts(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (trial % 2)
        pts[i] = {i, static_cast<double>(coarse(rng)), static_cast<double>(coarse(rng)),
                  static_cast<double>(coarse(rng))};
      else
        pts[i] = {i, unit(rng), unit(rng), unit(rng)};
    }
    const auto cap = cap_dist(rng);
    if (str_pack(pts, cap).groups == testing::reference_pack(pts, cap)) ++str_ok;
  }

  std::uniform_int_distribution<std::size_t> objs(2, 6), times(4, 12), kk(2, 4), mm(2, 3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto tl = testing::random_timeline(rng, objs(rng), times(rng));
    const PatternParams p{kk(rng), mm(rng), 3.0};
    if (mine_convoys(tl, p) == testing::convoy_oracle(tl, p) &&
        mine_swarms(tl, p) == testing::swarm_oracle(tl, p))
      ++pattern_ok;
  }
  return {dbscan_ok == 20 && str_ok == 20 && pattern_ok == 10,
          "dbscan " + std::to_string(dbscan_ok) + "/20, str " + std::to_string(str_ok) +
              "/20, convoy+swarm " + std::to_string(pattern_ok) + "/10"};
}

// ---- 3 --------------------------------------------------------------------

Outcome positional() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ut(0.0, 86400.0);
  const std::size_t d = 256;
  std::uniform_int_distribution<std::size_t> ui(0, d - 1);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double t = std::floor(ut(rng));
    const auto i = ui(rng);
    worst = std::max(worst, std::abs(positional_encoding(t, d)[i] - testing::direct_pe(t, i, d)));
  }
  bool zero_ok = true;
  const auto pe0 = positional_encoding(0.0, d);
  for (std::size_t i = 0; i < d; ++i) zero_ok = zero_ok && pe0[i] == (i % 2 ? 1.0 : 0.0);
  return {worst <= 1e-12 && zero_ok, "max |diff| " + fmt(worst, 3) + " over 1000 pairs, t=0 pattern " +
                                         (zero_ok ? "exact" : "wrong")};
}

// ---- 4, 5 -----------------------------------------------------------------

struct ModelRun {
  fs::path dir;
  double train_seconds = 0.0;
};

ModelRun model_run(RunContext ctx, bool with_synth) {
  if (with_synth) run_stage(ctx, "synth");
  for (const char* s : {"ingest", "pretrain", "pack"}) run_stage(ctx, s);
  const auto start = Clock::now();
  run_stage(ctx, "train");
  const double secs = seconds_since(start);
  for (const char* s : {"encode", "sweep", "report"}) run_stage(ctx, s);
  return {ctx.dir, secs};
}

struct TrainingResults {
  std::vector<ModelRun> attn;  // seeds 1..3
  std::optional<ModelRun> lstm_ae;  // seed 1
};

TrainingResults default_corpus_runs(const fs::path& work) {
  TrainingResults out;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto ctx = context(work / ("seed" + std::to_string(seed)) / "attn_mean", seed);
    out.attn.push_back(model_run(ctx, true));
    if (seed == 1) {
      auto plain = context(work / "seed1" / "lstm_ae", seed);
      const auto data = ctx.dir / "data";
      plain.config.input_trajectories = (data / "trajectories.csv").string();
      plain.config.input_ground_truth = (data / "ground_truth.csv").string();
      plain.config.input_gates = (data / "gates.csv").string();
      plain.config.train.similarity_path = false;
      out.lstm_ae = model_run(plain, false);
    }
  }
  return out;
}

Outcome convergence(const TrainingResults& r) {
  const double lambda = RunConfig{}.train.lambda_sim;
  std::size_t ok = 0;
  std::string detail;
  for (std::size_t i = 0; i < r.attn.size(); ++i) {
    const auto loss = total_loss(r.attn[i].dir, lambda);
    const bool good = loss.size() == 20 && loss.back() < loss.front() && r.attn[i].train_seconds < 600.0;
    ok += good;
    detail += (i ? "; " : "") + std::string("seed ") + std::to_string(i + 1) + ": " + fmt(loss.front()) +
              " -> " + fmt(loss.back()) + " in " + fmt(r.attn[i].train_seconds, 3) + " s";
  }
  return {ok == 3, std::to_string(ok) + "/3 (" + detail + ")"};
}

Outcome recovery(const TrainingResults& r) {
  const auto attn = read_summary(r.attn.front().dir);
  const auto plain = read_summary(r.lstm_ae->dir);
  const double a = number(attn.at("ari")).value_or(-1.0);
  const double b = number(plain.at("ari")).value_or(-1.0);
  return {a >= 0.8 && a > b, "ATTN-MEAN ARI " + fmt(a) + " at eps " + attn.at("best_eps") + " (" +
                                 attn.at("n_clusters") + " clusters), LSTM-AE ARI " + fmt(b) + " at eps " +
                                 plain.at("best_eps")};
}

// ---- 6 --------------------------------------------------------------------

Outcome pe_ablation(const fs::path& work) {
  std::size_t ok = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto ctx = context(work / ("seed" + std::to_string(seed)), seed);
    run_experiment(ctx, "pe-ablation");
    const auto on = number(read_summary(ctx.dir / "pe_on").at("wae"));
    const auto off = number(read_summary(ctx.dir / "pe_off").at("wae"));
    const bool good = on && off && *on < *off;
    ok += good;
    detail += (seed > 1 ? "; " : "") + std::string("seed ") + std::to_string(seed) + ": on " +
              (on ? fmt(*on) : "NA") + " vs off " + (off ? fmt(*off) : "NA");
  }
  return {ok == 3, std::to_string(ok) + "/3 (" + detail + ")"};
}

// ---- 7 --------------------------------------------------------------------

Outcome baseline_semantics() {
  const PatternParams p{18, 2, 3.0};
  const auto scattered = testing::scattered_pair();
  const auto tl_s = cluster_timeline(build_snapshots(scattered, 10), scattered.size(), p);
  const auto swarms = mine_swarms(tl_s, p);
  const auto convoys_s = mine_convoys(tl_s, p);
  std::set<Timestamp> together;
  for (const auto& s : swarms) together.insert(s.timestamps.begin(), s.timestamps.end());

  const auto lockstep = testing::lockstep_pair();
  const auto tl_l = cluster_timeline(build_snapshots(lockstep, 10), lockstep.size(), p);
  const auto convoys_l = mine_convoys(tl_l, p);
  return {swarms.size() >= 1 && convoys_s.empty() && convoys_l.size() == 1,
          "scattered: " + std::to_string(swarms.size()) + " swarm(s) over " + std::to_string(together.size()) +
              " timestamps, " + std::to_string(convoys_s.size()) + " convoys; lockstep: " +
              std::to_string(convoys_l.size()) + " convoy"};
}

// ---- 8 --------------------------------------------------------------------

Outcome sweep_contract() {
  Points enc;
  std::vector<std::string> gates;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 0.02);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 5; ++i) {
      std::vector<double> v(4, n(rng));
      for (auto& x : v) x += n(rng);
      v[static_cast<std::size_t>(c)] += 1.0;
      enc.push_back(v);
      gates.push_back("g" + std::to_string(c));
    }
  const SweepConfig config;
  const auto rows = epsilon_sweep(enc, config, gates);
  std::vector<MetricReport> reports;
  for (const auto& r : rows) reports.push_back(r.report);
  std::ostringstream csv;
  write_sweep_csv(csv, reports);
  std::istringstream lines(csv.str());
  std::string line;
  std::size_t data_rows = 0, na_rows = 0;
  bool na_consistent = true;
  std::getline(lines, line);
  for (std::size_t i = 0; std::getline(lines, line); ++i, ++data_rows) {
    const bool has_na = line.find("NA") != std::string::npos;
    na_rows += has_na;
    const auto& r = reports.at(i);
    const bool degenerate = r.n_clusters < 2 || !r.dbi || !r.silhouette || !r.wae;
    na_consistent = na_consistent && has_na == degenerate;
  }
  const bool first_na = reports.front().n_clusters == 0 && !reports.front().dbi &&
                        !reports.front().silhouette && !reports.front().wae;

  auto line_pts = [](std::initializer_list<double> xs) {
    Points p;
    for (double x : xs) p.push_back({x, 0.0});
    return p;
  };
  const auto line6 = line_pts({0, 1, 2, 6, 7, 9});
  const std::vector<int> ab{0, 0, 0, 1, 1, 1};
  const double sil_hand = (35.0 / 44 + 16.0 / 19 + 23.0 / 32 + 3.0 / 5 + 3.0 / 4 + 11.0 / 16) / 6.0;
  const Points sym{{0, 0}, {0, 2}, {4, 0}, {4, 2}};
  const std::vector<std::string> wae_gates{"g1", "g1", "g1", "g2", "g1", "g1", "g2", "g3"};
  double worst = 0.0;
  worst = std::max(worst, std::abs(*davies_bouldin(line6, ab) - 16.0 / 57.0));
  worst = std::max(worst, std::abs(*davies_bouldin(sym, std::vector<int>{0, 0, 1, 1}) - 0.5));
  worst = std::max(worst, std::abs(*silhouette(line6, ab) - sil_hand));
  worst = std::max(worst, std::abs(*weighted_avg_entropy(std::vector<int>{0, 0, 1, 1, 2, 2, 2, 2}, wae_gates) - 1.0));

  return {data_rows == 2001 && reports.size() == 2001 && na_rows > 0 && first_na && na_consistent && worst <= 1e-9,
          std::to_string(data_rows) + " rows, " + std::to_string(na_rows) + " with NA markers, hand metrics max |diff| " +
              fmt(worst, 3)};
}

// ---- 9 --------------------------------------------------------------------

std::map<std::string, std::string> tree_hashes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = sha256_file(e.path());
  return out;
}

Outcome determinism(const fs::path& work) {
  std::vector<std::map<std::string, std::string>> trees;
  for (const char* side : {"a", "b"}) {
    auto ctx = context(work / side / "run", 1);
    ctx.config.train.epochs = 2;
    for (const auto& stage : stage_names()) run_stage(ctx, stage);
    trees.push_back(tree_hashes(ctx.dir));
  }
  std::size_t differing = 0;
  for (const auto& [file, hash] : trees[0]) {
    auto it = trees[1].find(file);
    differing += it == trees[1].end() || it->second != hash;
  }
  differing += trees[1].size() - std::min(trees[1].size(), trees[0].size());
  return {differing == 0 && trees[0].size() == trees[1].size(),
          std::to_string(trees[0].size()) + " files across all stages, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string work = "acceptance_work";
  std::vector<int> only;
  app.add_option("--work", work, "Scratch directory (recreated)");
  app.add_option("--only", only, "Subset of criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const fs::path root(work);
  fs::remove_all(root);
  fs::create_directories(root);
  auto wanted = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };

  int failures = 0;
  auto report = [&](int n, const char* title, const Outcome& o) {
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", n, title, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  auto attempt = [&](int n, const char* title, auto&& body) {
    if (!wanted(n)) return;
    try {
      report(n, title, body());
    } catch (const std::exception& e) {
      report(n, title, {false, std::string("error: ") + e.what()});
    }
  };

  attempt(1, "gradients vs finite differences", gradients);
  attempt(2, "oracle equivalence", oracles);
  attempt(3, "positional encoding values", positional);
  if (wanted(4) || wanted(5)) {
    std::optional<TrainingResults> runs;
    std::string error;
    try {
      runs = default_corpus_runs(root / "default");
    } catch (const std::exception& e) {
      error = e.what();
    }
    attempt(4, "training convergence", [&]() -> Outcome {
      if (!runs) return {false, "error: " + error};
      return convergence(*runs);
    });
    attempt(5, "companion recovery", [&]() -> Outcome {
      if (!runs) return {false, "error: " + error};
      return recovery(*runs);
    });
  }
  attempt(6, "positional-encoding ablation", [&] { return pe_ablation(root / "pe"); });
  attempt(7, "convoy vs swarm semantics", baseline_semantics);
  attempt(8, "sweep contract", sweep_contract);
  attempt(9, "determinism", [&] { return determinism(root / "determinism"); });
  return failures;
}
