// SPDX-License-Identifier: Apache-2.0
#include "tc/config.hpp"

#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

#include "tc/error.hpp"
#include "text.hpp"

namespace tc {

namespace {

struct KeySpec {
  const char* name;
  const char* help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  fail(ErrorKind::kConfig, "config key '" + key + "': '" + value + "' is not " + want);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  const auto n = text::parse_int(v);
  if (!n || *n < 0) bad_value(key, v, "a non-negative integer");
  return static_cast<std::uint64_t>(*n);
}

std::int64_t to_i64(const std::string& key, const std::string& v) {
  const auto n = text::parse_int(v);
  if (!n) bad_value(key, v, "an integer");
  return *n;
}

double to_real(const std::string& key, const std::string& v) {
  const auto n = text::parse_double(v);
  if (!n) bad_value(key, v, "a number");
  return *n;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  bad_value(key, v, "a boolean (true|false)");
}

std::string str(bool b) { return b ? "true" : "false"; }
std::string str(double d) { return text::format_double(d); }
std::string str(std::uint64_t n) { return std::to_string(n); }
std::string str(std::int64_t n) { return std::to_string(n); }
std::string str(const std::optional<std::uint64_t>& n) { return n ? std::to_string(*n) : ""; }


#define TC_SIZE(NAME, HELP, EXPR)                                                    \
  KeySpec {                                                                          \
    NAME, HELP,                                                                      \
        [](RunConfig& c, const std::string& v) { c.EXPR = to_u64(NAME, v); },        \
        [](const RunConfig& c) { return str(static_cast<std::uint64_t>(c.EXPR)); }   \
  }
#define TC_INT(NAME, HELP, EXPR)                                                     \
  KeySpec {                                                                          \
    NAME, HELP,                                                                      \
        [](RunConfig& c, const std::string& v) { c.EXPR = to_i64(NAME, v); },        \
        [](const RunConfig& c) { return str(static_cast<std::int64_t>(c.EXPR)); }    \
  }
#define TC_REAL(NAME, HELP, EXPR)                                                    \
  KeySpec {                                                                          \
    NAME, HELP,                                                                      \
        [](RunConfig& c, const std::string& v) { c.EXPR = to_real(NAME, v); },       \
        [](const RunConfig& c) { return str(c.EXPR); }                               \
  }
#define TC_BOOL(NAME, HELP, EXPR)                                                    \
  KeySpec {                                                                          \
    NAME, HELP,                                                                      \
        [](RunConfig& c, const std::string& v) { c.EXPR = to_bool(NAME, v); },       \
        [](const RunConfig& c) { return str(c.EXPR); }                               \
  }
#define TC_STR(NAME, HELP, EXPR)                                                     \
  KeySpec {                                                                          \
    NAME, HELP, [](RunConfig& c, const std::string& v) { c.EXPR = v; },              \
        [](const RunConfig& c) { return c.EXPR; }                                    \
  }
#define TC_SEED(NAME, HELP, EXPR)                                                    \
  KeySpec {                                                                          \
    NAME, HELP,                                                                      \
        [](RunConfig& c, const std::string& v) {                                     \
          if (v.empty())                                                             \
            c.EXPR.reset();                                                          \
          else                                                                       \
            c.EXPR = to_u64(NAME, v);                                                \
        },                                                                           \
        [](const RunConfig& c) { return str(c.EXPR); }                               \
  }

const std::vector<KeySpec>& specs() {
  static const std::vector<KeySpec> table = {
      TC_SIZE("seed", "master seed for every stochastic stage", seed),
      TC_SEED("synth.seed", "generator seed (empty: seed)", synth_seed),
      TC_SEED("embed.seed", "skip-gram seed (empty: seed)", embed_seed),
      TC_SEED("train.seed", "model initialization seed (empty: seed)", train_seed),

      TC_STR("input.trajectories", "trajectory CSV (empty: <run>/data/trajectories.csv)",
             input_trajectories),
      TC_STR("input.gates", "gate CSV (empty: <run>/data/gates.csv)", input_gates),
      TC_STR("input.ground_truth", "ground truth CSV (empty: <run>/data/ground_truth.csv)",
             input_ground_truth),

      TC_SIZE("synth.n_groups", "planted companion groups", synth.n_groups),
      TC_SIZE("synth.group_size_min", "smallest group", synth.group_size_min),
      TC_SIZE("synth.group_size_max", "largest group", synth.group_size_max),
      TC_SIZE("synth.n_loners", "trajectories without companions", synth.n_loners),
      TC_REAL("synth.area_width", "area width in meters", synth.area_width),
      TC_REAL("synth.area_height", "area height in meters", synth.area_height),
      TC_SIZE("synth.n_gates", "gates spread along the area border", synth.n_gates),
      TC_REAL("synth.speed_min", "slowest walking speed (m/s)", synth.speed_min),
      TC_REAL("synth.speed_max", "fastest walking speed (m/s)", synth.speed_max),
      TC_REAL("synth.jitter_sigma", "positional noise per point (m)", synth.jitter_sigma),
      TC_INT("synth.offset_min", "smallest member start offset (s)", synth.offset_min),
      TC_INT("synth.offset_max", "largest member start offset (s)", synth.offset_max),
      TC_SIZE("synth.points_min", "fewest points per trajectory", synth.points_min),
      TC_SIZE("synth.points_max", "most points per trajectory", synth.points_max),
      TC_INT("synth.sample_period", "seconds between raw points", synth.sample_period),
      TC_INT("synth.start_span", "group start times spread over [0, span] s", synth.start_span),
      TC_BOOL("synth.clone_groups", "add a time-shifted clone of each group", synth.clone_groups),
      TC_INT("synth.clone_shift_min", "smallest clone delay (s)", synth.clone_shift_min),
      TC_INT("synth.clone_shift_max", "largest clone delay (s)", synth.clone_shift_max),

      TC_REAL("grid.cell_len", "grid cell side (m)", cell_len),

      TC_SIZE("embed.d_cell", "embedding and hidden size", skipgram.d_cell),
      TC_SIZE("embed.window", "skip-gram context window", skipgram.window),
      TC_SIZE("embed.negatives", "negative samples per pair", skipgram.negatives),
      TC_SIZE("embed.epochs", "skip-gram epochs", skipgram.epochs),
      TC_REAL("embed.lr", "skip-gram initial learning rate", skipgram.lr),
      TC_BOOL("embed.positional_encoding", "add sinusoidal timestamp encodings",
              positional_encoding),

      TC_SIZE("pack.capacity", "STR group capacity", pack_capacity),
      TC_BOOL("pack.normalize", "min-max scale (t, x, y) before packing", pack_normalize),

      TC_SIZE("train.batch_size", "trajectories per batch", train.batch_size),
      TC_SIZE("train.epochs", "training epochs", train.epochs),
      TC_REAL("train.lambda_sim", "weight of the similarity loss", train.lambda_sim),
      TC_REAL("train.lr", "Adam learning rate", train.lr),
      TC_REAL("train.weight_decay", "decoupled weight decay", train.weight_decay),
      TC_REAL("train.grad_clip", "global gradient norm limit (<= 0 disables)", train.grad_clip),
      TC_REAL("train.attention_sigma", "std of the initial attention vector",
              train.attention_sigma),
      TC_BOOL("train.similarity_path", "enable the mean path (false: plain LSTM autoencoder)",
              train.similarity_path),

      TC_REAL("sweep.eps_from", "first epsilon", sweep.eps_from),
      TC_REAL("sweep.eps_to", "last epsilon", sweep.eps_to),
      TC_REAL("sweep.eps_step", "epsilon increment", sweep.eps_step),
      TC_SIZE("sweep.min_pts", "DBSCAN min_pts", sweep.min_pts),
      KeySpec{"sweep.metric", "DBSCAN distance on encodings (cosine|euclidean)",
              [](RunConfig& c, const std::string& v) {
                if (v != "cosine" && v != "euclidean") bad_value("sweep.metric", v, "cosine or euclidean");
                c.sweep.metric = parse_distance_metric(v);
              },
              [](const RunConfig& c) { return std::string(distance_metric_name(c.sweep.metric)); }},

      TC_INT("baseline.step", "snapshot lattice step (s)", baseline_step),
      TC_SIZE("baseline.k", "minimum timestamps per pattern", pattern.k),
      TC_SIZE("baseline.m", "minimum objects per pattern", pattern.m),
      TC_REAL("baseline.e", "snapshot density distance (m)", pattern.e),
  };
  return table;
}

#undef TC_SIZE
#undef TC_INT
#undef TC_REAL
#undef TC_BOOL
#undef TC_STR
#undef TC_SEED

const KeySpec& find(const std::string& key) {
  for (const auto& s : specs())
    if (key == s.name) return s;
  fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
}

}  // namespace

SynthConfig RunConfig::resolved_synth() const {
  auto s = synth;
  s.seed = synth_seed.value_or(seed);
  return s;
}

SkipGramConfig RunConfig::resolved_skipgram() const {
  auto s = skipgram;
  s.seed = embed_seed.value_or(seed);
  return s;
}

TrainConfig RunConfig::resolved_train() const {
  auto t = train;
  t.seed = train_seed.value_or(seed);
  return t;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  find(key).set(*this, std::string(text::trim(value)));
}

std::string RunConfig::get(const std::string& key) const { return find(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& s : specs()) out.emplace_back(s.name);
    return out;
  }();
  return names;
}

std::string RunConfig::describe(const std::string& key) { return find(key).help; }

std::string RunConfig::canonical() const {
  std::ostringstream out;
  for (const auto& s : specs()) out << s.name << " = " << s.get(*this) << '\n';
  return out.str();
}

void RunConfig::validate() const {
  synth.validate();
  require(cell_len > 0.0, ErrorKind::kConfig, "grid.cell_len must be > 0");
  require(skipgram.d_cell >= 2 && skipgram.d_cell % 2 == 0, ErrorKind::kConfig,
          "embed.d_cell must be even and >= 2");
  require(skipgram.window >= 1 && skipgram.epochs >= 1 && skipgram.lr > 0.0, ErrorKind::kConfig,
          "embed.window, embed.epochs must be >= 1 and embed.lr > 0");
  require(pack_capacity >= 1, ErrorKind::kConfig, "pack.capacity must be >= 1");
  train.validate();
  require(train.batch_size <= pack_capacity, ErrorKind::kConfig,
          "train.batch_size must not exceed pack.capacity");
  sweep_length(sweep);
  require(sweep.min_pts >= 1, ErrorKind::kConfig, "sweep.min_pts must be >= 1");
  require(baseline_step >= 1, ErrorKind::kConfig, "baseline.step must be >= 1");
  require(pattern.k >= 1 && pattern.m >= 1 && pattern.e > 0.0, ErrorKind::kConfig,
          "baseline.k, baseline.m must be >= 1 and baseline.e > 0");
}

void apply_config_text(RunConfig& config, std::istream& in, const std::string& origin) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = std::string_view(line);
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = text::trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    require(eq != std::string_view::npos, ErrorKind::kConfig,
            origin + ":" + std::to_string(line_no) + ": expected key = value");
    const auto key = std::string(text::trim(body.substr(0, eq)));
    const auto value = std::string(text::trim(body.substr(eq + 1)));
    try {
      config.set(key, value);
    } catch (const Error& e) {
      fail(ErrorKind::kConfig, origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::kIo, "cannot read config file " + path.string());
  apply_config_text(config, in, path.string());
}

}  // namespace tc
