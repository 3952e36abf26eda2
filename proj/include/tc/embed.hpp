// SPDX-License-Identifier: Apache-2.0
//
// Cell-token embeddings (skip-gram with negative sampling over trajectory
// token sequences) and sinusoidal timestamp encodings.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tc/geo.hpp"

namespace tc {

struct EmbeddingTable {
  std::size_t n_cells = 0;
  std::size_t d_cell = 0;
  std::vector<double> vectors;  // row-major [n_cells × d_cell]

  EmbeddingTable() = default;
  EmbeddingTable(std::size_t cells, std::size_t dim)
      : n_cells(cells), d_cell(dim), vectors(cells * dim, 0.0) {}

  std::span<double> row(std::size_t cell) { return {vectors.data() + cell * d_cell, d_cell}; }
  std::span<const double> row(std::size_t cell) const {
    return {vectors.data() + cell * d_cell, d_cell};
  }
};

/// Binary layout: magic, version, n_cells, d_cell as little-endian uint32,
/// then row-major float64 values.
void save_embedding_table(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable load_embedding_table(const std::filesystem::path& path);
/// `cell,v0,...` for inspection.
void write_embedding_csv(std::ostream& out, const EmbeddingTable& table);

struct SkipGramConfig {
  std::size_t d_cell = 256;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double lr = 0.025;  // decays linearly to lr·1e-4 over training
  std::uint64_t seed = 1;
};

struct SkipGramResult {
  EmbeddingTable table;
  std::vector<double> epoch_loss;  // mean loss per (center, context) pair
};

/// Trains cell embeddings. Each trajectory is a sentence with consecutive
/// repeats of a cell collapsed; pairs with equal cells are skipped.
/// Negatives follow the unigram frequency raised to 0.75.
SkipGramResult train_skipgram(std::span<const TokenSeq> corpus, std::size_t n_cells,
                              const SkipGramConfig& config);

/// Negative-sampling loss −log σ(u_o·v_c) − Σ_k log σ(−u_k·v_c) and its
/// gradients with respect to the center, context and negative vectors.
struct SkipGramGrad {
  double loss = 0.0;
  std::vector<double> d_center;
  std::vector<double> d_context;
  std::vector<std::vector<double>> d_negatives;
};
SkipGramGrad skipgram_loss_grad(std::span<const double> center, std::span<const double> context,
                                std::span<const std::vector<double>> negatives);

/// PE(t, 2p) = sin(t / 10000^(2p/d)), PE(t, 2p+1) = cos(t / 10000^(2p/d)).
std::vector<double> positional_encoding(double t, std::size_t d_cell);
void positional_encoding(double t, std::span<double> out);

struct PosEncoder {
  std::size_t d_cell = 0;
  Timestamp t_origin = 0;  // dataset minimum timestamp, mapped to position 0
  Timestamp t_max = 0;     // largest position observed

  static PosEncoder for_dataset(std::span<const Trajectory> trajectories, std::size_t d_cell);
  std::vector<double> operator()(Timestamp t) const;
};

struct VecSeq {
  std::string id;
  std::vector<std::vector<double>> vectors;
  std::vector<Timestamp> timestamps;
};

/// vectors[i] = table[cell_i] + PE(t_i); pass no encoder to skip the PE term.
VecSeq embed_trajectory(const TokenSeq& tokens, const EmbeddingTable& table,
                        const PosEncoder* encoder);

}  // namespace tc
