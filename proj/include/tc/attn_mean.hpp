// SPDX-License-Identifier: Apache-2.0
//
// Dual autoencoder with global-attention pooling.
//
// Left path: each trajectory is encoded (LSTM + attention pooling) and
// decoded back to its own length; reconstruction loss is the sum of the
// per-trajectory MSEs. Right path: the batch's encodings are averaged, the
// mean is decoded to the longest batch length, re-encoded, and every
// encoding is pulled toward the result by mean cosine distance. Both paths
// use the same encoder and decoder storage.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tc/embed.hpp"
#include "tc/nn.hpp"
#include "tc/strpack.hpp"
#include "tc/tensor.hpp"

namespace tc {

struct ModelParams {
  nn::LstmParams encoder;
  nn::LstmParams decoder;
  ad::Tensor attention;  // [h]

  std::size_t hidden() const { return attention.size(); }

  /// Hidden size equals the input width so an encoding can seed the decoder.
  static ModelParams init(std::size_t d_cell, std::uint64_t seed, double attention_sigma = 0.1);
  std::vector<ad::Tensor*> tensors();
  std::vector<nn::NamedTensor> named() const;
  static ModelParams from_named(std::span<const nn::NamedTensor> entries);
};

void save_model(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_model(const std::filesystem::path& path);

struct TrainConfig {
  std::size_t group_capacity = 64;
  std::size_t batch_size = 8;
  std::size_t epochs = 20;
  double lambda_sim = 1.0;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  double grad_clip = 5.0;  // global-norm threshold, <= 0 disables
  double attention_sigma = 0.1;
  std::uint64_t seed = 1;
  bool similarity_path = true;

  void validate() const;
};

struct Encoding {
  std::string id;
  std::vector<double> h;
};

// ---- taped building blocks ---------------------------------------------------

struct BoundModel {
  nn::LstmVars encoder;
  nn::LstmVars decoder;
  ad::Var attention;
};

BoundModel bind(ad::Tape& tape, ModelParams& params);

struct EncodedSteps {
  ad::Var pooled;                // [k×h]
  std::vector<ad::Var> states;  // per step [k×h]
};

/// Runs the encoder over padded step inputs ([k×d] each) and pools the
/// valid prefix of every row.
EncodedSteps encode_steps(const BoundModel& model, std::span<const ad::Var> inputs,
                          std::span<const std::size_t> lengths);

/// Autoregressive decoder: hidden state starts at init [k×h], cell state
/// at zero, first input is zero, each later input is the previous output.
std::vector<ad::Var> decode_steps(const BoundModel& model, const ad::Var& init, std::size_t length);

struct BatchLoss {
  ad::Var total;
  ad::Var rec;
  std::optional<ad::Var> sim;  // absent when the similarity path is off
  ad::Var encodings;           // [k×h]
};

BatchLoss forward_batch(ad::Tape& tape, const BoundModel& model,
                        std::span<const VecSeq* const> batch, const TrainConfig& config);

// ---- training and inference ----------------------------------------------------

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double l_rec = 0.0;
  std::optional<double> l_sim;
  double total = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

TrainResult train(const GroupAssignment& groups, std::span<const VecSeq> sequences,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Tape-free encoder pass for one trajectory.
Encoding encode(const VecSeq& sequence, const ModelParams& params);
/// Tape-free decoder pass.
std::vector<std::vector<double>> decode(std::span<const double> init, std::size_t length,
                                        const ModelParams& params);
std::vector<Encoding> encode_all(std::span<const VecSeq> sequences, const ModelParams& params);

/// `traj_id,v0,...`
void write_encodings_csv(std::ostream& out, std::span<const Encoding> encodings);
std::vector<Encoding> read_encodings_csv(std::istream& in);
/// `epoch,l_rec,l_sim` with NA for a disabled similarity path.
void write_loss_history_csv(std::ostream& out, std::span<const EpochStats> history);

}  // namespace tc
