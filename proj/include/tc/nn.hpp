// SPDX-License-Identifier: Apache-2.0
//
// Neural building blocks on top of the tape: LSTM cell, Adam with decoupled
// weight decay, global-norm clipping and the parameter checkpoint format.
#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tc/tensor.hpp"

namespace tc::nn {

using ad::Tensor;
using ad::Var;

/// Gate rows are laid out (input, forget, cell, output), h rows each.
struct LstmParams {
  Tensor w_ih;  // [4h × d]
  Tensor w_hh;  // [4h × h]
  Tensor b;     // [4h]

  std::size_t hidden() const { return w_hh.shape().at(1); }
  std::size_t input() const { return w_ih.shape().at(1); }

  static LstmParams zeros(std::size_t input, std::size_t hidden);
  /// Uniform(−1/√h, 1/√h) for every weight and bias.
  static LstmParams uniform(std::size_t input, std::size_t hidden, std::mt19937_64& rng);
};

/// Parameters bound to one tape.
struct LstmVars {
  Var w_ih, w_hh, b;
};

LstmVars bind(ad::Tape& tape, LstmParams& params);

struct LstmState {
  Var h;
  Var c;
};

/// One step for a batch: x [k×d], h_prev/c_prev [k×h].
LstmState lstm_step(const LstmVars& params, const Var& x, const Var& h_prev, const Var& c_prev);

/// Same step with the input projection x·W_ihᵀ + b precomputed ([k×4h]),
/// so a whole known input sequence can be projected with one GEMM.
LstmState lstm_step_projected(const LstmVars& params, const Var& x_proj, const Var& h_prev,
                              const Var& c_prev);

/// Fused gate nonlinearities: pre-activations [k×4h] and c_prev [k×h]
/// give [k×2h] holding (h | c).
Var lstm_cell(const Var& gates, const Var& c_prev);

/// Tape-free step on plain matrices (inference).
void lstm_step_inplace(const LstmParams& params, const ad::Matrix& x, ad::Matrix& h,
                       ad::Matrix& c);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(AdamConfig cfg, std::span<Tensor* const> params);
};

/// One Adam update from each parameter's grad(). Decoupled weight decay
/// (p ← p − lr·wd·p) is applied before the bias-corrected moment update.
void adam_step(AdamState& state, std::span<Tensor* const> params);

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping. max_norm ≤ 0 disables clipping.
double clip_grad_norm(std::span<Tensor* const> params, double max_norm);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Versioned little-endian checkpoint: entries are written in the order
/// given, each as (name, shape, row-major float64 data).
void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> entries);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

}  // namespace tc::nn
