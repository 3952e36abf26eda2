// SPDX-License-Identifier: Apache-2.0
#include "tc/embed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "binio.hpp"
#include "tc/error.hpp"
#include "text.hpp"

namespace tc {

namespace {

constexpr std::uint32_t kTableMagic = 0x424D'4554;  // "TEMB" little-endian
constexpr std::uint32_t kTableVersion = 1;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// −log σ(x), without overflow for large |x|.
double neg_log_sigmoid(double x) {
  return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

void save_embedding_table(const std::filesystem::path& path, const EmbeddingTable& table) {
  require(table.vectors.size() == table.n_cells * table.d_cell, ErrorKind::kShape,
          "embedding table storage does not match its dimensions");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::kIo, "cannot write " + path.string());
  binio::put_u32(out, kTableMagic);
  binio::put_u32(out, kTableVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(table.n_cells));
  binio::put_u32(out, static_cast<std::uint32_t>(table.d_cell));
  for (double v : table.vectors) binio::put_f64(out, v);
  require(out.good(), ErrorKind::kIo, "failed writing " + path.string());
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kIo, "cannot open " + path.string());
  require(binio::get_u32(in, "magic") == kTableMagic, ErrorKind::kParse,
          path.string() + " is not an embedding table");
  const auto version = binio::get_u32(in, "version");
  require(version == kTableVersion, ErrorKind::kParse,
          "unsupported embedding table version " + std::to_string(version));
  const auto n_cells = binio::get_u32(in, "n_cells");
  const auto d_cell = binio::get_u32(in, "d_cell");
  EmbeddingTable table(n_cells, d_cell);
  for (auto& v : table.vectors) v = binio::get_f64(in, "embedding values");
  return table;
}

void write_embedding_csv(std::ostream& out, const EmbeddingTable& table) {
  out << "cell";
  for (std::size_t j = 0; j < table.d_cell; ++j) out << ",v" << j;
  out << '\n';
  for (std::size_t c = 0; c < table.n_cells; ++c) {
    out << c;
    for (double v : table.row(c)) out << ',' << text::format_double(v);
    out << '\n';
  }
}

SkipGramGrad skipgram_loss_grad(std::span<const double> center, std::span<const double> context,
                                std::span<const std::vector<double>> negatives) {
  const std::size_t d = center.size();
  require(context.size() == d, ErrorKind::kShape, "skip-gram: context dimension mismatch");
  SkipGramGrad out;
  out.d_center.assign(d, 0.0);
  out.d_context.assign(d, 0.0);

  const double s_pos = dot(center, context);
  out.loss = neg_log_sigmoid(s_pos);
  const double g_pos = sigmoid(s_pos) - 1.0;
  for (std::size_t i = 0; i < d; ++i) {
    out.d_center[i] += g_pos * context[i];
    out.d_context[i] = g_pos * center[i];
  }
  for (const auto& neg : negatives) {
    require(neg.size() == d, ErrorKind::kShape, "skip-gram: negative dimension mismatch");
    const double s = dot(center, neg);
    out.loss += neg_log_sigmoid(-s);
    const double g = sigmoid(s);
    std::vector<double> d_neg(d);
    for (std::size_t i = 0; i < d; ++i) {
      out.d_center[i] += g * neg[i];
      d_neg[i] = g * center[i];
    }
    out.d_negatives.push_back(std::move(d_neg));
  }
  return out;
}

SkipGramResult train_skipgram(std::span<const TokenSeq> corpus, std::size_t n_cells,
                              const SkipGramConfig& config) {
  require(n_cells >= 2, ErrorKind::kInvalidArgument, "skip-gram needs at least 2 cells");
  require(config.window >= 1 && config.negatives >= 1 && config.d_cell >= 1,
          ErrorKind::kInvalidArgument, "skip-gram window, negatives and d_cell must be >= 1");

  std::vector<std::vector<std::size_t>> sentences;
  std::vector<double> freq(n_cells, 0.0);
  for (const auto& seq : corpus) {
    std::vector<std::size_t> s;
    for (const auto& tok : seq.tokens) {
      require(tok.cell >= 0 && static_cast<std::size_t>(tok.cell) < n_cells,
              ErrorKind::kInvalidArgument,
              "token cell " + std::to_string(tok.cell) + " outside the table");
      const auto cell = static_cast<std::size_t>(tok.cell);
      if (s.empty() || s.back() != cell) s.push_back(cell);
      freq[cell] += 1.0;
    }
    if (!s.empty()) sentences.push_back(std::move(s));
  }
  require(!sentences.empty(), ErrorKind::kInvalidArgument, "skip-gram corpus is empty");

  const std::size_t d = config.d_cell;
  std::mt19937_64 rng(config.seed);
  SkipGramResult result{EmbeddingTable(n_cells, d), {}};
  auto& in_vecs = result.table;
  {
    const double bound = 0.5 / static_cast<double>(d);
    std::uniform_real_distribution<double> init(-bound, bound);
    for (auto& v : in_vecs.vectors) v = init(rng);
  }
  std::vector<double> out_vecs(n_cells * d, 0.0);
  auto out_row = [&](std::size_t c) { return std::span<double>(out_vecs.data() + c * d, d); };

  for (auto& f : freq) f = std::pow(f, 0.75);
  std::discrete_distribution<std::size_t> noise(freq.begin(), freq.end());

  std::size_t pairs_per_epoch = 0;
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::size_t lo = i >= config.window ? i - config.window : 0;
      const std::size_t hi = std::min(s.size() - 1, i + config.window);
      for (std::size_t j = lo; j <= hi; ++j)
        if (j != i && s[j] != s[i]) ++pairs_per_epoch;
    }
  }
  const double total_pairs = static_cast<double>(pairs_per_epoch * config.epochs);
  double seen = 0.0;

  std::vector<std::vector<double>> neg_vecs(config.negatives);
  std::vector<std::size_t> neg_ids(config.negatives);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (const auto& s : sentences) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        const std::size_t lo = i >= config.window ? i - config.window : 0;
        const std::size_t hi = std::min(s.size() - 1, i + config.window);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i || s[j] == s[i]) continue;
          const std::size_t center = s[i];
          const std::size_t context = s[j];
          std::size_t n_neg = 0;
          for (std::size_t k = 0; k < config.negatives; ++k) {
            const auto cand = noise(rng);
            if (cand == context) continue;
            neg_ids[n_neg] = cand;
            auto r = out_row(cand);
            neg_vecs[n_neg].assign(r.begin(), r.end());
            ++n_neg;
          }
          const double lr = config.lr * std::max(1e-4, 1.0 - seen / total_pairs);
          seen += 1.0;
          auto cv = in_vecs.row(center);
          auto ov = out_row(context);
          const auto grad = skipgram_loss_grad(
              cv, ov, std::span<const std::vector<double>>(neg_vecs.data(), n_neg));
          epoch_loss += grad.loss;
          for (std::size_t q = 0; q < d; ++q) {
            cv[q] -= lr * grad.d_center[q];
            ov[q] -= lr * grad.d_context[q];
          }
          for (std::size_t k = 0; k < n_neg; ++k) {
            auto nv = out_row(neg_ids[k]);
            for (std::size_t q = 0; q < d; ++q) nv[q] -= lr * grad.d_negatives[k][q];
          }
        }
      }
    }
    result.epoch_loss.push_back(pairs_per_epoch ? epoch_loss / static_cast<double>(pairs_per_epoch)
                                                : 0.0);
  }
  for (double v : in_vecs.vectors)
    require(std::isfinite(v), ErrorKind::kNumeric, "skip-gram produced a non-finite embedding");
  return result;
}

void positional_encoding(double t, std::span<double> out) {
  const std::size_t d = out.size();
  require(d % 2 == 0, ErrorKind::kInvalidArgument, "positional encoding needs an even d_cell");
  for (std::size_t p = 0; p < d / 2; ++p) {
    const double angle = t / std::pow(10000.0, 2.0 * static_cast<double>(p) / static_cast<double>(d));
    out[2 * p] = std::sin(angle);
    out[2 * p + 1] = std::cos(angle);
  }
}

std::vector<double> positional_encoding(double t, std::size_t d_cell) {
  std::vector<double> out(d_cell);
  positional_encoding(t, out);
  return out;
}

PosEncoder PosEncoder::for_dataset(std::span<const Trajectory> trajectories, std::size_t d_cell) {
  require(d_cell % 2 == 0, ErrorKind::kInvalidArgument, "positional encoding needs an even d_cell");
  Timestamp lo = std::numeric_limits<Timestamp>::max();
  Timestamp hi = std::numeric_limits<Timestamp>::min();
  for (const auto& traj : trajectories) {
    for (const auto& p : traj.points) {
      lo = std::min(lo, p.t);
      hi = std::max(hi, p.t);
    }
  }
  require(lo <= hi, ErrorKind::kInvalidArgument, "no timestamps to derive the encoding range");
  return {d_cell, lo, hi - lo};
}

std::vector<double> PosEncoder::operator()(Timestamp t) const {
  return positional_encoding(static_cast<double>(t - t_origin), d_cell);
}

VecSeq embed_trajectory(const TokenSeq& tokens, const EmbeddingTable& table,
                        const PosEncoder* encoder) {
  require(encoder == nullptr || encoder->d_cell == table.d_cell, ErrorKind::kShape,
          "positional encoding width " + std::to_string(encoder ? encoder->d_cell : 0) +
              " != embedding width " + std::to_string(table.d_cell));
  VecSeq out{tokens.id, {}, {}};
  out.vectors.reserve(tokens.tokens.size());
  std::vector<double> pe(table.d_cell);
  for (const auto& tok : tokens.tokens) {
    require(tok.cell >= 0 && static_cast<std::size_t>(tok.cell) < table.n_cells,
            ErrorKind::kInvalidArgument,
            "trajectory '" + tokens.id + "' token cell " + std::to_string(tok.cell) +
                " outside the embedding table");
    const auto row = table.row(static_cast<std::size_t>(tok.cell));
    std::vector<double> v(row.begin(), row.end());
    if (encoder != nullptr) {
      positional_encoding(static_cast<double>(tok.t - encoder->t_origin), pe);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += pe[i];
    }
    out.vectors.push_back(std::move(v));
    out.timestamps.push_back(tok.t);
  }
  return out;
}

}  // namespace tc
