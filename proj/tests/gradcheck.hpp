// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference checks for taped computations, plus one case
// per differentiable op. Shared by the unit and acceptance suites.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "tc/attn_mean.hpp"
#include "tc/nn.hpp"
#include "tc/tensor.hpp"

namespace tc::testing {

using ad::Tape;
using ad::Tensor;
using ad::Var;

// Builds a value from bound parameters; any output shape.
using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCase {
  std::string name;
  std::vector<std::shared_ptr<Tensor>> params;
  Builder build;
};

struct GradReport {
  double max_rel = 0.0;
  std::size_t checked = 0;
};

inline Tensor random_tensor(std::mt19937_64& rng, ad::Shape shape, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = n(rng);
  return t;
}

// Weighted sum of every output entry with fixed random weights, so each
// output element carries a distinct upstream gradient.
inline double reduce_value(const Tensor& out, const Tensor& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * weights[i];
  return s;
}

inline GradReport check_gradients(GradCase& c, double h = 1e-6, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  Tensor weights;
  {
    Tape probe;
    std::vector<Var> vars;
    for (auto& p : c.params) vars.push_back(probe.constant(*p));
    weights = random_tensor(rng, c.build(probe, vars).shape());
  }

  for (auto& p : c.params) {
    p->set_requires_grad(true);
    p->zero_grad();
  }
  {
    Tape tape;
    std::vector<Var> vars;
    for (auto& p : c.params) vars.push_back(tape.parameter(*p));
    Var out = c.build(tape, vars);
    Var loss = ad::sum(ad::mul(out, tape.constant(weights)));
    tape.backward(loss);
  }

  auto eval = [&] {
    Tape tape;
    std::vector<Var> vars;
    for (auto& p : c.params) vars.push_back(tape.constant(*p));
    return reduce_value(c.build(tape, vars).value(), weights);
  };

  GradReport report;
  for (auto& p : c.params) {
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double saved = (*p)[i];
      (*p)[i] = saved + h;
      const double up = eval();
      (*p)[i] = saved - h;
      const double down = eval();
      (*p)[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad()[i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-4});
      report.max_rel = std::max(report.max_rel, std::abs(numeric - analytic) / denom);
      ++report.checked;
    }
  }
  return report;
}

inline std::vector<GradCase> op_cases(std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  auto P = [&](ad::Shape s, double scale = 1.0) {
    return std::make_shared<Tensor>(random_tensor(rng, std::move(s), scale));
  };
  auto positive = [&](ad::Shape s) {
    auto t = P(std::move(s));
    for (auto& v : t->data()) v = 0.5 + std::abs(v);
    return t;
  };
  std::vector<GradCase> cases;
  cases.push_back({"matmul", {P({3, 4}), P({4, 2})},
                   [](Tape&, const std::vector<Var>& v) { return ad::matmul(v[0], v[1]); }});
  cases.push_back({"linear", {P({3, 4}), P({5, 4})},
                   [](Tape&, const std::vector<Var>& v) { return ad::linear(v[0], v[1]); }});
  cases.push_back({"linear_bias", {P({3, 4}), P({5, 4}), P({5})},
                   [](Tape&, const std::vector<Var>& v) { return ad::linear(v[0], v[1], v[2]); }});
  cases.push_back({"add", {P({2, 3}), P({2, 3})},
                   [](Tape&, const std::vector<Var>& v) { return ad::add(v[0], v[1]); }});
  cases.push_back({"add_shared_input", {P({2, 3})},
                   [](Tape&, const std::vector<Var>& v) { return ad::add(v[0], v[0]); }});
  cases.push_back({"sub", {P({2, 3}), P({2, 3})},
                   [](Tape&, const std::vector<Var>& v) { return ad::sub(v[0], v[1]); }});
  cases.push_back({"mul", {P({2, 3}), P({2, 3})},
                   [](Tape&, const std::vector<Var>& v) { return ad::mul(v[0], v[1]); }});
  cases.push_back({"scale", {P({4})},
                   [](Tape&, const std::vector<Var>& v) { return ad::scale(v[0], -1.7); }});
  cases.push_back({"sigmoid", {P({3, 3})},
                   [](Tape&, const std::vector<Var>& v) { return ad::sigmoid(v[0]); }});
  cases.push_back({"tanh", {P({3, 3})},
                   [](Tape&, const std::vector<Var>& v) { return ad::tanh(v[0]); }});
  cases.push_back({"softmax_vector", {P({5})},
                   [](Tape&, const std::vector<Var>& v) { return ad::softmax(v[0], 0); }});
  cases.push_back({"softmax_rows", {P({3, 4})},
                   [](Tape&, const std::vector<Var>& v) { return ad::softmax(v[0], 1); }});
  cases.push_back({"softmax_cols", {P({3, 4})},
                   [](Tape&, const std::vector<Var>& v) { return ad::softmax(v[0], 0); }});
  cases.push_back({"mean_vector", {P({5})},
                   [](Tape&, const std::vector<Var>& v) { return ad::mean(v[0], 0); }});
  cases.push_back({"mean_rows", {P({3, 4})},
                   [](Tape&, const std::vector<Var>& v) { return ad::mean(v[0], 0); }});
  cases.push_back({"mean_cols", {P({3, 4})},
                   [](Tape&, const std::vector<Var>& v) { return ad::mean(v[0], 1); }});
  cases.push_back({"sum", {P({3, 4})},
                   [](Tape&, const std::vector<Var>& v) { return ad::sum(v[0]); }});
  cases.push_back({"concat_rows", {P({2, 3}), P({1, 3})}, [](Tape&, const std::vector<Var>& v) {
                     const Var parts[] = {v[0], v[1]};
                     return ad::concat(parts, 0);
                   }});
  cases.push_back({"concat_cols", {P({2, 3}), P({2, 2})}, [](Tape&, const std::vector<Var>& v) {
                     const Var parts[] = {v[0], v[1], v[0]};
                     return ad::concat(parts, 1);
                   }});
  cases.push_back({"slice_rows", {P({4, 3})},
                   [](Tape&, const std::vector<Var>& v) { return ad::slice(v[0], 0, 1, 3); }});
  cases.push_back({"slice_cols", {P({4, 3})},
                   [](Tape&, const std::vector<Var>& v) { return ad::slice(v[0], 1, 1, 2); }});
  cases.push_back({"reshape", {P({2, 6})},
                   [](Tape&, const std::vector<Var>& v) { return ad::reshape(v[0], {3, 4}); }});
  cases.push_back({"cosine_distance", {P({6}), P({6})}, [](Tape&, const std::vector<Var>& v) {
                     return ad::cosine_distance(v[0], v[1]);
                   }});
  cases.push_back({"mse_masked", {P({4, 3}), P({4, 3})}, [](Tape&, const std::vector<Var>& v) {
                     static const std::uint8_t mask[] = {1, 0, 1, 1};
                     return ad::mse(v[0], v[1], mask);
                   }});
  {
    auto targets = std::make_shared<std::vector<Tensor>>();
    for (int t = 0; t < 3; ++t) targets->push_back(random_tensor(rng, {2, 3}));
    cases.push_back({"sequence_mse", {P({2, 3}), P({2, 3}), P({2, 3})},
                     [targets](Tape&, const std::vector<Var>& v) {
                       static const std::size_t lengths[] = {3, 2};
                       return ad::sequence_mse(v, *targets, lengths);
                     }});
  }
  cases.push_back({"attention_pool", {P({2, 3}), P({2, 3}), P({2, 3}), P({3})},
                   [](Tape&, const std::vector<Var>& v) {
                     static const std::size_t lengths[] = {3, 1};
                     const Var states[] = {v[0], v[1], v[2]};
                     return ad::attention_pool(states, v[3], lengths);
                   }});
  cases.push_back({"lstm_cell", {P({2, 8}), P({2, 2})}, [](Tape&, const std::vector<Var>& v) {
                     return nn::lstm_cell(v[0], v[1]);
                   }});
  // LSTM step over x, h, c and all weights (d = 3, h = 2)
  cases.push_back({"lstm_step", {P({2, 3}), P({2, 2}), P({2, 2}), P({8, 3}, 0.5), P({8, 2}, 0.5), P({8}, 0.5)},
                   [](Tape&, const std::vector<Var>& v) {
                     nn::LstmVars p{v[3], v[4], v[5]};
                     auto s = nn::lstm_step(p, v[0], v[1], v[2]);
                     const Var parts[] = {s.h, s.c};
                     return ad::concat(parts, 1);
                   }});
  cases.push_back({"lstm_two_steps", {P({1, 3}), P({1, 3}), P({8, 3}, 0.5), P({8, 2}, 0.5), P({8}, 0.5)},
                   [](Tape& tape, const std::vector<Var>& v) {
                     nn::LstmVars p{v[2], v[3], v[4]};
                     Var zero = tape.constant(Tensor({1, 2}));
                     auto s1 = nn::lstm_step(p, v[0], zero, zero);
                     auto s2 = nn::lstm_step(p, v[1], s1.h, s1.c);
                     return s2.h;
                   }});
  cases.push_back({"log_domain_chain", {positive({3})}, [](Tape&, const std::vector<Var>& v) {
                     return ad::mul(ad::sigmoid(v[0]), ad::tanh(ad::scale(v[0], 0.3)));
                   }});
  return cases;
}

// A toy batch of two trajectories with different lengths (d = h = 4).
struct ToyBatch {
  ModelParams params;
  std::vector<VecSeq> seqs;
};

inline ToyBatch toy_batch(std::uint64_t seed = 3) {
  ToyBatch b;
  b.params = ModelParams::init(4, seed, 0.5);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> n(0.0, 1.0);
  const std::size_t lens[] = {4, 3};
  for (std::size_t i = 0; i < 2; ++i) {
    VecSeq s;
    s.id = "toy" + std::to_string(i);
    for (std::size_t t = 0; t < lens[i]; ++t) {
      s.vectors.push_back({n(rng), n(rng), n(rng), n(rng)});
      s.timestamps.push_back(static_cast<Timestamp>(10 * t));
    }
    b.seqs.push_back(std::move(s));
  }
  return b;
}

// Full dual-path loss on the toy batch as a gradient case over every model
// tensor. The shared pointers alias the batch's parameters.
inline GradCase model_loss_case(std::shared_ptr<ToyBatch> batch, bool similarity_path) {
  GradCase c;
  c.name = similarity_path ? "attn_mean_loss" : "lstm_ae_loss";
  for (auto* t : batch->params.tensors())
    c.params.push_back(std::shared_ptr<Tensor>(batch, t));
  c.build = [batch, similarity_path](Tape& tape, const std::vector<Var>& v) {
    BoundModel m{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}, v[6]};
    TrainConfig cfg;
    cfg.similarity_path = similarity_path;
    std::vector<const VecSeq*> ptrs;
    for (const auto& s : batch->seqs) ptrs.push_back(&s);
    return forward_batch(tape, m, ptrs, cfg).total;
  };
  return c;
}

}  // namespace tc::testing
