// SPDX-License-Identifier: Apache-2.0
#include "tc/attn_mean.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>

#include "tc/error.hpp"
#include "text.hpp"

namespace tc {

namespace {

const char* const kParamNames[] = {"encoder.w_ih", "encoder.w_hh", "encoder.b",
                                   "decoder.w_ih", "decoder.w_hh", "decoder.b",
                                   "attention.a"};

ad::Tensor zeros_like_rows(std::size_t k, std::size_t d) { return ad::Tensor({k, d}); }

}  // namespace

ModelParams ModelParams::init(std::size_t d_cell, std::uint64_t seed, double attention_sigma) {
  require(d_cell >= 1, ErrorKind::kInvalidArgument, "model width must be >= 1");
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.encoder = nn::LstmParams::uniform(d_cell, d_cell, rng);
  p.decoder = nn::LstmParams::uniform(d_cell, d_cell, rng);
  p.attention = ad::Tensor({d_cell});
  std::normal_distribution<double> normal(0.0, attention_sigma);
  for (auto& v : p.attention.data()) v = normal(rng);
  return p;
}

std::vector<ad::Tensor*> ModelParams::tensors() {
  return {&encoder.w_ih, &encoder.w_hh, &encoder.b, &decoder.w_ih,
          &decoder.w_hh, &decoder.b,    &attention};
}

std::vector<nn::NamedTensor> ModelParams::named() const {
  const ad::Tensor* ts[] = {&encoder.w_ih, &encoder.w_hh, &encoder.b, &decoder.w_ih,
                            &decoder.w_hh, &decoder.b,    &attention};
  std::vector<nn::NamedTensor> out;
  for (std::size_t i = 0; i < std::size(ts); ++i) {
    const auto& t = *ts[i];
    out.push_back({kParamNames[i], ad::Tensor(t.shape(), {t.data().begin(), t.data().end()})});
  }
  return out;
}

ModelParams ModelParams::from_named(std::span<const nn::NamedTensor> entries) {
  require(entries.size() == std::size(kParamNames), ErrorKind::kParse,
          "checkpoint holds " + std::to_string(entries.size()) + " tensors, expected " +
              std::to_string(std::size(kParamNames)));
  ModelParams p;
  auto ts = p.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    require(entries[i].name == kParamNames[i], ErrorKind::kParse,
            "checkpoint entry " + std::to_string(i) + " is '" + entries[i].name +
                "', expected '" + kParamNames[i] + "'");
    *ts[i] = entries[i].tensor;
  }
  const std::size_t h = p.attention.size();
  const bool ok = p.attention.rank() == 1 && p.encoder.w_ih.shape() == ad::Shape{4 * h, h} &&
                  p.encoder.w_hh.shape() == ad::Shape{4 * h, h} &&
                  p.encoder.b.shape() == ad::Shape{4 * h} &&
                  p.decoder.w_ih.shape() == ad::Shape{4 * h, h} &&
                  p.decoder.w_hh.shape() == ad::Shape{4 * h, h} &&
                  p.decoder.b.shape() == ad::Shape{4 * h};
  require(ok, ErrorKind::kParse, "checkpoint tensor shapes are inconsistent");
  return p;
}

void save_model(const std::filesystem::path& path, const ModelParams& params) {
  nn::save_checkpoint(path, params.named());
}

ModelParams load_model(const std::filesystem::path& path) {
  return ModelParams::from_named(nn::load_checkpoint(path));
}

void TrainConfig::validate() const {
  require(batch_size >= 1 && group_capacity >= 1, ErrorKind::kConfig,
          "batch_size and group_capacity must be >= 1");
  require(batch_size <= group_capacity, ErrorKind::kConfig,
          "batch_size must not exceed group_capacity");
  require(lambda_sim >= 0.0, ErrorKind::kConfig, "lambda_sim must be >= 0");
  require(lr > 0.0 && weight_decay >= 0.0, ErrorKind::kConfig,
          "lr must be > 0 and weight_decay >= 0");
}

BoundModel bind(ad::Tape& tape, ModelParams& params) {
  return {nn::bind(tape, params.encoder), nn::bind(tape, params.decoder),
          tape.parameter(params.attention)};
}

EncodedSteps encode_steps(const BoundModel& model, std::span<const ad::Var> inputs,
                          std::span<const std::size_t> lengths) {
  require(!inputs.empty(), ErrorKind::kInvalidArgument, "encode: empty sequence");
  auto& tape = inputs.front().tape();
  const std::size_t k = inputs.front().value().rows();
  const std::size_t h = model.encoder.w_hh.value().shape()[1];
  auto h_t = tape.constant(zeros_like_rows(k, h));
  auto c_t = tape.constant(zeros_like_rows(k, h));
  EncodedSteps out;
  out.states.reserve(inputs.size());
  // The input sequence is fully known, so project every step at once.
  const auto projected = ad::linear(ad::concat(inputs, 0), model.encoder.w_ih, model.encoder.b);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const auto x_proj = ad::slice(projected, 0, t * k, (t + 1) * k);
    auto next = nn::lstm_step_projected(model.encoder, x_proj, h_t, c_t);
    h_t = next.h;
    c_t = next.c;
    out.states.push_back(h_t);
  }
  out.pooled = ad::attention_pool(out.states, model.attention, lengths);
  return out;
}

std::vector<ad::Var> decode_steps(const BoundModel& model, const ad::Var& init, std::size_t length) {
  require(length >= 1, ErrorKind::kInvalidArgument, "decode: length must be >= 1");
  auto& tape = init.tape();
  const std::size_t k = init.value().rows();
  const std::size_t h = init.value().cols();
  const std::size_t d = model.decoder.w_ih.value().shape()[1];
  require(d == h, ErrorKind::kShape, "decode: output width must equal hidden width");
  auto x = tape.constant(zeros_like_rows(k, d));
  auto h_t = init;
  auto c_t = tape.constant(zeros_like_rows(k, h));
  std::vector<ad::Var> outputs;
  outputs.reserve(length);
  auto first = nn::lstm_step(model.decoder, x, h_t, c_t);
  outputs.push_back(first.h);
  h_t = first.h;
  c_t = first.c;
  if (length == 1) return outputs;
  // From step 2 on the input is the previous hidden state, so both
  // projections collapse into one with the summed weights.
  const auto w_sum = ad::add(model.decoder.w_ih, model.decoder.w_hh);
  for (std::size_t t = 1; t < length; ++t) {
    const auto hc = nn::lstm_cell(ad::linear(h_t, w_sum, model.decoder.b), c_t);
    h_t = ad::slice(hc, 1, 0, h);
    c_t = ad::slice(hc, 1, h, 2 * h);
    outputs.push_back(h_t);
  }
  return outputs;
}

BatchLoss forward_batch(ad::Tape& tape, const BoundModel& model,
                        std::span<const VecSeq* const> batch, const TrainConfig& config) {
  require(!batch.empty(), ErrorKind::kInvalidArgument, "forward_batch: empty batch");
  const std::size_t k = batch.size();
  const std::size_t d = model.encoder.w_ih.value().shape()[1];
  std::vector<std::size_t> lengths(k);
  std::size_t max_len = 0;
  for (std::size_t i = 0; i < k; ++i) {
    lengths[i] = batch[i]->vectors.size();
    require(lengths[i] >= 1, ErrorKind::kInvalidArgument,
            "forward_batch: trajectory '" + batch[i]->id + "' is empty");
    max_len = std::max(max_len, lengths[i]);
  }

  // Padded step-major inputs; padded rows stay zero and are masked downstream.
  std::vector<ad::Tensor> targets;
  targets.reserve(max_len);
  std::vector<ad::Var> inputs;
  inputs.reserve(max_len);
  for (std::size_t t = 0; t < max_len; ++t) {
    ad::Tensor step({k, d});
    for (std::size_t i = 0; i < k; ++i) {
      if (t >= lengths[i]) continue;
      const auto& v = batch[i]->vectors[t];
      require(v.size() == d, ErrorKind::kShape,
              "forward_batch: trajectory '" + batch[i]->id + "' has width " +
                  std::to_string(v.size()) + ", model expects " + std::to_string(d));
      std::copy(v.begin(), v.end(), step.data().begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    inputs.push_back(tape.constant(step));
    targets.push_back(std::move(step));
  }

  BatchLoss out;
  const auto encoded = encode_steps(model, inputs, lengths);
  out.encodings = encoded.pooled;
  const auto decoded = decode_steps(model, encoded.pooled, max_len);
  out.rec = ad::sum(ad::sequence_mse(decoded, targets, lengths));
  out.total = out.rec;

  if (config.similarity_path) {
    const auto mean = ad::reshape(ad::mean(encoded.pooled, 0), {1, encoded.pooled.value().cols()});
    const auto intermediate = decode_steps(model, mean, max_len);
    const std::size_t full[] = {max_len};
    const auto re_encoded = encode_steps(model, intermediate, full).pooled;
    ad::Var acc;
    for (std::size_t i = 0; i < k; ++i) {
      const auto dist = ad::cosine_distance(ad::slice(encoded.pooled, 0, i, i + 1), re_encoded);
      acc = acc.valid() ? ad::add(acc, dist) : dist;
    }
    out.sim = ad::scale(acc, 1.0 / static_cast<double>(k));
    out.total = ad::add(out.rec, ad::scale(*out.sim, config.lambda_sim));
  }
  return out;
}

TrainResult train(const GroupAssignment& groups, std::span<const VecSeq> sequences,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  require(!sequences.empty(), ErrorKind::kInvalidArgument, "train: no sequences");
  const std::size_t d = sequences.front().vectors.empty() ? 0 : sequences.front().vectors[0].size();
  require(d >= 1, ErrorKind::kInvalidArgument, "train: first sequence is empty");
  for (const auto& g : groups.groups) {
    require(!g.empty(), ErrorKind::kInvalidArgument, "train: empty group");
    for (auto idx : g)
      require(idx < sequences.size(), ErrorKind::kInvalidArgument, "train: group index out of range");
  }

  TrainResult result{ModelParams::init(d, config.seed, config.attention_sigma), {}};
  auto params = result.params.tensors();
  for (auto* p : params) p->set_requires_grad(true);
  nn::AdamState adam({config.lr, 0.9, 0.999, 1e-8, config.weight_decay}, params);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double rec_sum = 0.0, sim_sum = 0.0, total_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t gi = 0; gi < groups.groups.size(); ++gi) {
      const auto& group = groups.groups[gi];
      for (std::size_t start = 0; start < group.size(); start += config.batch_size) {
        const auto end = std::min(group.size(), start + config.batch_size);
        std::vector<const VecSeq*> batch;
        for (std::size_t j = start; j < end; ++j) batch.push_back(&sequences[group[j]]);
        try {
          ad::Tape tape;
          const auto model = bind(tape, result.params);
          const auto loss = forward_batch(tape, model, batch, config);
          for (auto* p : params) p->zero_grad();
          tape.backward(loss.total);
          nn::clip_grad_norm(params, config.grad_clip);
          nn::adam_step(adam, params);
          rec_sum += loss.rec.value().item();
          if (loss.sim) sim_sum += loss.sim->value().item();
          total_sum += loss.total.value().item();
          ++batches;
        } catch (const Error& e) {
          fail(e.kind(), "epoch " + std::to_string(epoch) + ", group " + std::to_string(gi) +
                             ", batch at " + std::to_string(start) + ": " + e.what());
        }
        for (auto* p : params) {
          require(p->all_finite(), ErrorKind::kNumeric,
                  "epoch " + std::to_string(epoch) + ", group " + std::to_string(gi) +
                      ": parameters became non-finite");
        }
      }
    }
    const double n = static_cast<double>(std::max<std::size_t>(batches, 1));
    EpochStats stats{epoch, rec_sum / n, std::nullopt, total_sum / n};
    if (config.similarity_path) stats.l_sim = sim_sum / n;
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  for (auto* p : params) p->set_requires_grad(false);
  return result;
}

Encoding encode(const VecSeq& sequence, const ModelParams& params) {
  require(!sequence.vectors.empty(), ErrorKind::kInvalidArgument,
          "encode: trajectory '" + sequence.id + "' is empty");
  const std::size_t h = params.hidden();
  const std::size_t d = params.encoder.input();
  ad::Matrix hs = ad::Matrix::Zero(1, static_cast<Eigen::Index>(h));
  ad::Matrix cs = ad::Matrix::Zero(1, static_cast<Eigen::Index>(h));
  ad::Matrix x(1, static_cast<Eigen::Index>(d));
  std::vector<ad::Tensor> states;
  states.reserve(sequence.vectors.size());
  for (const auto& v : sequence.vectors) {
    require(v.size() == d, ErrorKind::kShape,
            "encode: trajectory '" + sequence.id + "' has width " + std::to_string(v.size()) +
                ", model expects " + std::to_string(d));
    for (std::size_t j = 0; j < d; ++j) x(0, static_cast<Eigen::Index>(j)) = v[j];
    nn::lstm_step_inplace(params.encoder, x, hs, cs);
    states.push_back(ad::Tensor::from_matrix(hs));
  }
  const auto alpha = ad::attention_weights(states, params.attention, 0, states.size());
  Encoding out{sequence.id, std::vector<double>(h, 0.0)};
  for (std::size_t t = 0; t < states.size(); ++t)
    for (std::size_t j = 0; j < h; ++j) out.h[j] += alpha[t] * states[t][j];
  for (double v : out.h)
    require(std::isfinite(v), ErrorKind::kNumeric, "encode: non-finite encoding for '" +
                                                       sequence.id + "'");
  return out;
}

std::vector<std::vector<double>> decode(std::span<const double> init, std::size_t length,
                                        const ModelParams& params) {
  require(length >= 1, ErrorKind::kInvalidArgument, "decode: length must be >= 1");
  const auto h = static_cast<Eigen::Index>(params.hidden());
  require(init.size() == params.hidden(), ErrorKind::kShape, "decode: init width mismatch");
  ad::Matrix hs(1, h);
  for (Eigen::Index j = 0; j < h; ++j) hs(0, j) = init[static_cast<std::size_t>(j)];
  ad::Matrix cs = ad::Matrix::Zero(1, h);
  ad::Matrix x = ad::Matrix::Zero(1, h);
  std::vector<std::vector<double>> out;
  for (std::size_t t = 0; t < length; ++t) {
    nn::lstm_step_inplace(params.decoder, x, hs, cs);
    out.emplace_back(hs.data(), hs.data() + h);
    x = hs;
  }
  return out;
}

std::vector<Encoding> encode_all(std::span<const VecSeq> sequences, const ModelParams& params) {
  std::vector<Encoding> out;
  out.reserve(sequences.size());
  for (const auto& s : sequences) out.push_back(encode(s, params));
  return out;
}

void write_encodings_csv(std::ostream& out, std::span<const Encoding> encodings) {
  const std::size_t h = encodings.empty() ? 0 : encodings.front().h.size();
  out << "traj_id";
  for (std::size_t j = 0; j < h; ++j) out << ",v" << j;
  out << '\n';
  for (const auto& e : encodings) {
    out << e.id;
    for (double v : e.h) out << ',' << text::format_double(v);
    out << '\n';
  }
}

std::vector<Encoding> read_encodings_csv(std::istream& in) {
  std::vector<Encoding> out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty()) continue;
    const auto fields = text::split(body, ',');
    if (line_no == 1 && fields.front() == "traj_id") {
      width = fields.size() - 1;
      continue;
    }
    const auto where = "encodings line " + std::to_string(line_no) + ": ";
    require(fields.size() >= 2, ErrorKind::kParse, where + "expected traj_id and values");
    if (width == 0) width = fields.size() - 1;
    require(fields.size() - 1 == width, ErrorKind::kParse, where + "inconsistent width");
    Encoding e{std::string(text::trim(fields[0])), {}};
    for (std::size_t j = 1; j < fields.size(); ++j) {
      const auto v = text::parse_double(fields[j]);
      require(v.has_value(), ErrorKind::kParse, where + "malformed value");
      e.h.push_back(*v);
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_loss_history_csv(std::ostream& out, std::span<const EpochStats> history) {
  out << "epoch,l_rec,l_sim\n";
  for (const auto& s : history) {
    out << s.epoch << ',' << text::format_double(s.l_rec) << ','
        << (s.l_sim ? text::format_double(*s.l_sim) : std::string("NA")) << '\n';
  }
}

}  // namespace tc
