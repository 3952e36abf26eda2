// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "tc/embed.hpp"
#include "tc/error.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace tc;

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

TokenSeq seq_of(const std::string& id, std::vector<std::int64_t> cells) {
  TokenSeq s{id, {}};
  Timestamp t = 0;
  for (auto c : cells) s.tokens.push_back({c, t += 10});
  return s;
}

}  // namespace

TEST_CASE("positional encoding at t = 0 alternates 0 and 1") {
  for (std::size_t d : {2u, 8u, 256u}) {
    auto pe = positional_encoding(0.0, d);
    REQUIRE(pe.size() == d);
    for (std::size_t i = 0; i < d; ++i) CHECK(pe[i] == (i % 2 == 0 ? 0.0 : 1.0));
  }
}

TEST_CASE("positional encoding matches the direct formula") {
  CHECK(positional_encoding(1.0, 16)[0] == doctest::Approx(0.841471).epsilon(1e-6));
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> ut(0.0, 20000.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double t = std::floor(ut(rng));
    auto pe = positional_encoding(t, 256);
    for (std::size_t i = 0; i < pe.size(); ++i) {
      CHECK(std::abs(pe[i] - testing::direct_pe(t, i, 256)) <= 1e-12);
      CHECK(std::abs(pe[i]) <= 1.0);
    }
  }
  CHECK_THROWS_AS(positional_encoding(1.0, 7), Error);
}

TEST_CASE("positional encoding is injective over a day of seconds") {
  std::set<std::vector<double>> seen;
  for (int t = 0; t <= 86400; t += 7) seen.insert(positional_encoding(t, 256));
  CHECK(seen.size() == 86400 / 7 + 1);
}

TEST_CASE("negative-sampling gradient matches finite differences") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 0.5);
  const std::size_t d = 6;
  std::vector<double> center(d), context(d);
  std::vector<std::vector<double>> negs(3, std::vector<double>(d));
  for (auto& v : center) v = n(rng);
  for (auto& v : context) v = n(rng);
  for (auto& row : negs)
    for (auto& v : row) v = n(rng);

  auto g = skipgram_loss_grad(center, context, negs);
  auto loss = [&] { return skipgram_loss_grad(center, context, negs).loss; };
  for (std::size_t i = 0; i < d; ++i) {
    CHECK(testing::rel_error(testing::central_difference(loss, center[i]), g.d_center[i]) < 1e-4);
    CHECK(testing::rel_error(testing::central_difference(loss, context[i]), g.d_context[i]) < 1e-4);
    for (std::size_t k = 0; k < negs.size(); ++k)
      CHECK(testing::rel_error(testing::central_difference(loss, negs[k][i]), g.d_negatives[k][i]) <
            1e-4);
  }
}

TEST_CASE("skip-gram on a single repeated token learns nothing") {
  std::vector<TokenSeq> corpus{seq_of("a", {3, 3, 3, 3, 3}), seq_of("b", {3, 3})};
  SkipGramConfig cfg;
  cfg.d_cell = 8;
  cfg.epochs = 3;
  auto result = train_skipgram(corpus, 5, cfg);
  cfg.epochs = 0;
  auto init = train_skipgram(corpus, 5, cfg);
  CHECK(result.table.vectors == init.table.vectors);
}

TEST_CASE("co-occurring cells end up closer than strangers") {
  std::vector<TokenSeq> corpus;
  for (int i = 0; i < 60; ++i) {
    corpus.push_back(seq_of("p" + std::to_string(i), {0, 1, 0, 1, 4, 5}));
    corpus.push_back(seq_of("q" + std::to_string(i), {2, 3, 2, 3, 6, 7}));
  }
  SkipGramConfig cfg;
  cfg.d_cell = 16;
  cfg.epochs = 10;
  cfg.window = 2;
  cfg.seed = 4;
  auto result = train_skipgram(corpus, 8, cfg);
  CHECK(cosine(result.table.row(0), result.table.row(1)) >
        cosine(result.table.row(0), result.table.row(2)));

  // epoch losses stay within a 5% band of monotone decrease
  const auto& losses = result.epoch_loss;
  REQUIRE(losses.size() == 10);
  for (std::size_t e = 1; e < losses.size(); ++e) CHECK(losses[e] <= losses[e - 1] * 1.05);
  CHECK(losses.back() < losses.front());

  auto again = train_skipgram(corpus, 8, cfg);
  CHECK(again.table.vectors == result.table.vectors);
}

TEST_CASE("skip-gram preconditions") {
  SkipGramConfig cfg;
  cfg.d_cell = 4;
  std::vector<TokenSeq> empty;
  CHECK_THROWS_AS(train_skipgram(empty, 4, cfg), Error);
  std::vector<TokenSeq> corpus{seq_of("a", {0, 1})};
  CHECK_THROWS_AS(train_skipgram(corpus, 1, cfg), Error);
  cfg.window = 0;
  CHECK_THROWS_AS(train_skipgram(corpus, 4, cfg), Error);
}

TEST_CASE("embedding adds table rows and encodings") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  const std::size_t d = 8;
  EmbeddingTable table(5, d);
  for (auto& v : table.vectors) v = n(rng);
  TokenSeq seq{"s", {{2, 100}, {4, 130}, {0, 170}}};
  PosEncoder enc{d, 100, 170};

  auto out = embed_trajectory(seq, table, &enc);
  REQUIRE(out.vectors.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(out.timestamps[i] == seq.tokens[i].t);
    for (std::size_t j = 0; j < d; ++j) {
      const double oracle = table.vectors[seq.tokens[i].cell * d + j] +
                            testing::direct_pe(static_cast<double>(seq.tokens[i].t - 100), j, d);
      CHECK(out.vectors[i][j] == doctest::Approx(oracle).epsilon(1e-14));
    }
  }
  // first token sits at the dataset origin
  for (std::size_t j = 0; j < d; ++j)
    CHECK(out.vectors[0][j] == table.vectors[2 * d + j] + (j % 2 == 0 ? 0.0 : 1.0));

  EmbeddingTable zeros(5, d);
  auto pure = embed_trajectory(seq, zeros, &enc);
  for (std::size_t i = 0; i < 3; ++i) CHECK(pure.vectors[i] == enc(seq.tokens[i].t));

  // linear in the table
  EmbeddingTable scaled = table;
  for (auto& v : scaled.vectors) v *= 2.5;
  auto a = embed_trajectory(seq, table, nullptr);
  auto b = embed_trajectory(seq, scaled, nullptr);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < d; ++j) CHECK(b.vectors[i][j] == doctest::Approx(2.5 * a.vectors[i][j]));

  PosEncoder wrong{d + 2, 0, 0};
  CHECK_THROWS_AS(embed_trajectory(seq, table, &wrong), Error);
}

TEST_CASE("dataset encoder spans the observed range") {
  std::vector<Trajectory> trajs{{"a", {{50, 0, 0}, {90, 0, 0}}}, {"b", {{20, 0, 0}, {60, 0, 0}}}};
  auto enc = PosEncoder::for_dataset(trajs, 4);
  CHECK(enc.t_origin == 20);
  CHECK(enc.t_max == 70);
  CHECK_THROWS_AS(PosEncoder::for_dataset(trajs, 5), Error);
}

TEST_CASE("embedding table file round trip") {
  testing::TempDir dir("embed");
  EmbeddingTable table(3, 4);
  for (std::size_t i = 0; i < table.vectors.size(); ++i) table.vectors[i] = 0.1 * i - 0.3;
  save_embedding_table(dir.path() / "e.bin", table);
  auto back = load_embedding_table(dir.path() / "e.bin");
  CHECK(back.n_cells == 3);
  CHECK(back.d_cell == 4);
  CHECK(back.vectors == table.vectors);
  testing::write_file(dir.path() / "bad.bin", "nope");
  CHECK_THROWS_AS(load_embedding_table(dir.path() / "bad.bin"), Error);
}
