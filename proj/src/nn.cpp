// SPDX-License-Identifier: Apache-2.0
#include "tc/nn.hpp"

#include <cmath>
#include <fstream>

#include "binio.hpp"
#include "tc/error.hpp"

namespace tc::nn {

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x4B43'4D41;  // "AMCK" little-endian
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

LstmParams LstmParams::zeros(std::size_t input, std::size_t hidden) {
  return {Tensor({4 * hidden, input}), Tensor({4 * hidden, hidden}), Tensor({4 * hidden})};
}

LstmParams LstmParams::uniform(std::size_t input, std::size_t hidden, std::mt19937_64& rng) {
  auto p = zeros(input, hidden);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto* t : {&p.w_ih, &p.w_hh, &p.b})
    for (auto& v : t->data()) v = dist(rng);
  return p;
}

LstmVars bind(ad::Tape& tape, LstmParams& params) {
  return {tape.parameter(params.w_ih), tape.parameter(params.w_hh), tape.parameter(params.b)};
}

Var lstm_cell(const Var& gates, const Var& c_prev) {
  const auto& gv = gates.value();
  const auto& cv = c_prev.value();
  if (!(gv.rank() == 2 && cv.rank() == 2 && gv.rows() == cv.rows() && gv.cols() == 4 * cv.cols()))
    fail(ErrorKind::kShape,
          "lstm_cell: gates " + ad::shape_string(gv.shape()) + " incompatible with state " +
              ad::shape_string(cv.shape()));
  const std::size_t k = cv.rows();
  const std::size_t h = cv.cols();
  ad::Tensor out({k, 2 * h});
  const auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (std::size_t r = 0; r < k; ++r) {
    const double* a = gv.data().data() + r * 4 * h;
    const double* cp = cv.data().data() + r * h;
    double* o = out.data().data() + r * 2 * h;
    for (std::size_t j = 0; j < h; ++j) {
      const double c = sig(a[h + j]) * cp[j] + sig(a[j]) * std::tanh(a[2 * h + j]);
      o[j] = sig(a[3 * h + j]) * std::tanh(c);
      o[h + j] = c;
    }
  }
  const Var in[] = {gates, c_prev};
  return gates.tape().record("lstm_cell", std::move(out), in, [gates, c_prev](ad::BackwardContext& ctx) {
    const auto& gv = gates.value();
    const auto& cv = c_prev.value();
    const auto& up = ctx.out_grad();
    const auto& val = ctx.out_value();
    const std::size_t k = cv.rows();
    const std::size_t h = cv.cols();
    auto* d_gates = ctx.grad_of(gates);
    auto* d_cprev = ctx.grad_of(c_prev);
    const auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    for (std::size_t r = 0; r < k; ++r) {
      const double* a = gv.data().data() + r * 4 * h;
      const double* cp = cv.data().data() + r * h;
      const double* dh = up.data().data() + r * 2 * h;
      const double* c = val.data().data() + r * 2 * h + h;
      for (std::size_t j = 0; j < h; ++j) {
        const double i = sig(a[j]), f = sig(a[h + j]), g = std::tanh(a[2 * h + j]),
                     o = sig(a[3 * h + j]);
        const double tc = std::tanh(c[j]);
        const double dc = dh[h + j] + dh[j] * o * (1.0 - tc * tc);
        if (d_gates) {
          double* dg = d_gates->data().data() + r * 4 * h;
          dg[j] += dc * g * i * (1.0 - i);
          dg[h + j] += dc * cp[j] * f * (1.0 - f);
          dg[2 * h + j] += dc * i * (1.0 - g * g);
          dg[3 * h + j] += dh[j] * tc * o * (1.0 - o);
        }
        if (d_cprev) (*d_cprev)[r * h + j] += dc * f;
      }
    }
  });
}

LstmState lstm_step_projected(const LstmVars& params, const Var& x_proj, const Var& h_prev,
                              const Var& c_prev) {
  const std::size_t h = params.w_hh.value().shape()[1];
  if (h_prev.value().cols() != h || c_prev.value().cols() != h)
    fail(ErrorKind::kShape,
          "lstm_step: state width " + std::to_string(h_prev.value().cols()) +
              " does not match hidden size " + std::to_string(h));
  const auto gates = ad::add(x_proj, ad::linear(h_prev, params.w_hh));
  const auto hc = lstm_cell(gates, c_prev);
  return {ad::slice(hc, 1, 0, h), ad::slice(hc, 1, h, 2 * h)};
}

LstmState lstm_step(const LstmVars& params, const Var& x, const Var& h_prev, const Var& c_prev) {
  return lstm_step_projected(params, ad::linear(x, params.w_ih, params.b), h_prev, c_prev);
}

void lstm_step_inplace(const LstmParams& params, const ad::Matrix& x, ad::Matrix& h,
                       ad::Matrix& c) {
  const auto hs = static_cast<Eigen::Index>(params.hidden());
  ad::Matrix gates = x * params.w_ih.mat().transpose();
  gates.noalias() += h * params.w_hh.mat().transpose();
  gates.rowwise() += params.b.mat().row(0);
  const auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const ad::Matrix i = gates.leftCols(hs).unaryExpr(sig);
  const ad::Matrix f = gates.middleCols(hs, hs).unaryExpr(sig);
  const ad::Matrix g = gates.middleCols(2 * hs, hs).array().tanh().matrix();
  const ad::Matrix o = gates.rightCols(hs).unaryExpr(sig);
  c = f.cwiseProduct(c) + i.cwiseProduct(g);
  h = o.cwiseProduct(ad::Matrix(c.array().tanh().matrix()));
}

AdamState::AdamState(AdamConfig cfg, std::span<Tensor* const> params) : config(cfg) {
  for (const auto* p : params) {
    m.emplace_back(p->shape());
    v.emplace_back(p->shape());
  }
}

void adam_step(AdamState& state, std::span<Tensor* const> params) {
  require(params.size() == state.m.size(), ErrorKind::kShape,
          "adam_step: parameter count changed since the optimizer was created");
  const auto& cfg = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    const auto& g = p.grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    require(m.shape() == p.shape(), ErrorKind::kShape, "adam_step: moment/parameter shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] -= cfg.lr * cfg.weight_decay * p[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

double clip_grad_norm(std::span<Tensor* const> params, double max_norm) {
  double sq = 0.0;
  for (auto* p : params)
    for (double g : p->grad().data()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto* p : params)
      for (auto& g : p->grad().data()) g *= factor;
  }
  return norm;
}

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> entries) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::kIo, "cannot write checkpoint " + path.string());
  binio::put_u32(out, kCheckpointMagic);
  binio::put_u32(out, kCheckpointVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    binio::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    binio::put_u32(out, static_cast<std::uint32_t>(e.tensor.rank()));
    for (auto d : e.tensor.shape()) binio::put_u64(out, d);
    for (double v : e.tensor.data()) binio::put_f64(out, v);
  }
  require(out.good(), ErrorKind::kIo, "failed writing checkpoint " + path.string());
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kIo, "cannot open checkpoint " + path.string());
  require(binio::get_u32(in, "magic") == kCheckpointMagic, ErrorKind::kParse,
          path.string() + " is not a model checkpoint");
  const auto version = binio::get_u32(in, "version");
  require(version == kCheckpointVersion, ErrorKind::kParse,
          "unsupported checkpoint version " + std::to_string(version));
  const auto count = binio::get_u32(in, "entry count");
  std::vector<NamedTensor> entries;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = binio::get_u32(in, "name length");
    require(len < 4096, ErrorKind::kParse, "checkpoint entry name too long");
    std::string name(len, '\0');
    binio::read_exact(in, name.data(), len, "name");
    const auto rank = binio::get_u32(in, "rank");
    require(rank <= 8, ErrorKind::kParse, "checkpoint entry '" + name + "' has rank " +
                                              std::to_string(rank));
    ad::Shape shape(rank);
    for (auto& d : shape) d = binio::get_u64(in, "shape");
    const auto n = ad::element_count(shape);
    require(n < (std::size_t{1} << 32), ErrorKind::kParse, "checkpoint entry too large");
    std::vector<double> data(n);
    for (auto& v : data) v = binio::get_f64(in, "data of " + name);
    entries.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  return entries;
}

}  // namespace tc::nn
