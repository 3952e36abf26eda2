// SPDX-License-Identifier: Apache-2.0
#include "tc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>

#include "tc/error.hpp"

namespace tc::ad {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// ---- Tensor ----------------------------------------------------------------

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (data_.size() != element_count(shape_))
    fail(ErrorKind::kShape,
          "tensor data size " + std::to_string(data_.size()) + " does not match shape " +
              shape_string(shape_));
}

Tensor Tensor::from_matrix(const Matrix& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  t.mat() = m;
  return t;
}

std::size_t Tensor::rows() const { return rank() == 2 ? shape_[0] : 1; }

std::size_t Tensor::cols() const {
  if (rank() == 2) return shape_[1];
  if (rank() == 1) return shape_[0];
  return 1;
}

double Tensor::item() const {
  require(data_.size() == 1, ErrorKind::kShape,
          "item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

MatrixMap Tensor::mat() {
  if (rank() > 2) fail(ErrorKind::kShape, "matrix view of rank-" + std::to_string(rank()) + " tensor");
  return MatrixMap(data_.data(), static_cast<Eigen::Index>(rows()),
                   static_cast<Eigen::Index>(cols()));
}

ConstMatrixMap Tensor::mat() const {
  if (rank() > 2) fail(ErrorKind::kShape, "matrix view of rank-" + std::to_string(rank()) + " tensor");
  return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(rows()),
                        static_cast<Eigen::Index>(cols()));
}

void Tensor::set_requires_grad(bool on) {
  requires_grad_ = on;
  if (on && grad_.empty()) grad_.emplace_back(shape_);
  if (!on) grad_.clear();
}

Tensor& Tensor::grad() {
  if (grad_.empty()) grad_.emplace_back(shape_);
  return grad_.front();
}

const Tensor& Tensor::grad() const {
  require(!grad_.empty(), ErrorKind::kState, "tensor has no gradient buffer");
  return grad_.front();
}

void Tensor::zero_grad() {
  if (!grad_.empty()) std::fill(grad_.front().data_.begin(), grad_.front().data_.end(), 0.0);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

// ---- Tape --------------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(id_); }

const Tensor& BackwardContext::out_grad() const { return tape_.nodes_[node_].grad; }
const Tensor& BackwardContext::out_value() const { return tape_.nodes_[node_].value; }

Tensor* BackwardContext::grad_of(const Var& input) {
  if (!tape_.needs_grad(input.id())) return nullptr;
  return &tape_.grad_slot(input.id());
}

void BackwardContext::accumulate_outer(const Var& input, const Tensor& g, const Tensor& x) {
  if (!tape_.needs_grad(input.id())) return;
  tape_.grad_slot(input.id());
  tape_.nodes_[input.id()].pending_outer.emplace_back(&g, &x);
}

void Tape::flush_outer(Node& node) {
  if (node.pending_outer.empty()) return;
  Eigen::Index rows = 0;
  for (const auto& [g, x] : node.pending_outer) rows += static_cast<Eigen::Index>(g->rows());
  const auto out_dim = static_cast<Eigen::Index>(node.pending_outer.front().first->cols());
  const auto in_dim = static_cast<Eigen::Index>(node.pending_outer.front().second->cols());
  Matrix gs(rows, out_dim);
  Matrix xs(rows, in_dim);
  Eigen::Index at = 0;
  for (const auto& [g, x] : node.pending_outer) {
    const auto r = static_cast<Eigen::Index>(g->rows());
    gs.middleRows(at, r) = g->mat();
    xs.middleRows(at, r) = x->mat();
    at += r;
  }
  node.grad.mat().noalias() += gs.transpose() * xs;
  node.pending_outer.clear();
  node.pending_outer.shrink_to_fit();
}

Tensor& Tape::grad_slot(std::uint32_t id) {
  auto& node = nodes_[id];
  if (node.grad.size() != node.value.size() || node.grad.shape() != node.value.shape()) {
    node.grad = Tensor(node.value.shape());
  }
  return node.grad;
}

Var Tape::constant(Tensor value) {
  require(value.all_finite(), ErrorKind::kNumeric, "constant: non-finite value");
  nodes_.push_back(Node{"constant", std::move(value), {}, nullptr, false, {}, {}});
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::parameter(Tensor& param) {
  require(param.all_finite(), ErrorKind::kNumeric, "parameter: non-finite value");
  nodes_.push_back(Node{"parameter", Tensor(param.shape(), {param.data().begin(), param.data().end()}),
                        {}, &param, true, {}, {}});
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::record(std::string_view op, Tensor value, std::span<const Var> inputs,
                 BackwardFn backward) {
  if (swept_) fail(ErrorKind::kState, std::string(op) + ": tape already swept");
  if (!value.all_finite()) {
    fail(ErrorKind::kNumeric, std::string(op) + ": non-finite result of shape " +
                                  shape_string(value.shape()));
  }
  bool needs = false;
  for (const auto& in : inputs) {
    if (&in.tape() != this)
      fail(ErrorKind::kInvalidArgument, std::string(op) + ": input from a different tape");
    needs = needs || nodes_[in.id()].needs_grad;
  }
  nodes_.push_back(Node{op, std::move(value), {}, nullptr, needs,
                        needs ? std::move(backward) : BackwardFn{}, {}});
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::backward(const Var& loss) {
  require(&loss.tape() == this, ErrorKind::kInvalidArgument, "backward: foreign variable");
  require(!swept_, ErrorKind::kState,
          "backward called twice on one tape; re-run the forward pass first");
  require(loss.value().size() == 1, ErrorKind::kShape,
          "backward needs a scalar, got " + shape_string(loss.shape()));
  swept_ = true;
  visits_ = 0;
  grad_slot(loss.id()).data()[0] = 1.0;
  for (std::int64_t id = loss.id(); id >= 0; --id) {
    auto& node = nodes_[static_cast<std::size_t>(id)];
    if (!node.needs_grad || node.grad.size() == 0) continue;
    flush_outer(node);
    if (node.param != nullptr) {
      auto& pg = node.param->grad();
      for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += node.grad[i];
    } else if (node.backward) {
      BackwardContext ctx(*this, static_cast<std::uint32_t>(id));
      node.backward(ctx);
      ++visits_;
    }
  }
}

Tensor Tape::grad(const Var& v) const {
  const auto& node = nodes_[v.id()];
  if (node.grad.size() == node.value.size() && node.grad.shape() == node.value.shape())
    return node.grad;
  return Tensor(node.value.shape());
}

// ---- ops -----------------------------------------------------------------------

namespace {

[[noreturn]] void shape_error(std::string_view op, const Shape& a, const Shape& b) {
  fail(ErrorKind::kShape, std::string(op) + ": incompatible shapes " + shape_string(a) +
                              " and " + shape_string(b));
}

void require_rank(std::string_view op, const Tensor& t, std::size_t lo, std::size_t hi) {
  if (t.rank() < lo || t.rank() > hi) {
    fail(ErrorKind::kShape, std::string(op) + ": unsupported rank " +
                                std::to_string(t.rank()) + " (shape " +
                                shape_string(t.shape()) + ")");
  }
}

template <typename F>
Var elementwise_unary(std::string_view op, const Var& a, F f, BackwardFn backward) {
  const auto& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  const Var in[] = {a};
  return a.tape().record(op, std::move(out), in, std::move(backward));
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.shape()[1] != bv.shape()[0])
    shape_error("matmul", av.shape(), bv.shape());
  Tensor out({av.shape()[0], bv.shape()[1]});
  out.mat().noalias() = av.mat() * bv.mat();
  const Var in[] = {a, b};
  return a.tape().record("matmul", std::move(out), in, [a, b](BackwardContext& ctx) {
    const auto g = ctx.out_grad().mat();
    if (auto* ga = ctx.grad_of(a)) ga->mat().noalias() += g * b.value().mat().transpose();
    if (auto* gb = ctx.grad_of(b)) gb->mat().noalias() += a.value().mat().transpose() * g;
  });
}

namespace {

Var linear_impl(const Var& x, const Var& w, const Var* b) {
  const auto& xv = x.value();
  const auto& wv = w.value();
  require_rank("linear", xv, 1, 2);
  if (wv.rank() != 2 || wv.shape()[1] != xv.cols()) shape_error("linear", xv.shape(), wv.shape());
  const std::size_t out_dim = wv.shape()[0];
  if (b != nullptr && (b->value().rank() != 1 || b->value().size() != out_dim))
    shape_error("linear(bias)", wv.shape(), b->value().shape());

  Shape out_shape = xv.rank() == 2 ? Shape{xv.shape()[0], out_dim} : Shape{out_dim};
  Tensor out(out_shape);
  auto om = out.mat();
  om.noalias() = xv.mat() * wv.mat().transpose();
  if (b != nullptr) om.rowwise() += b->value().mat().row(0);

  std::vector<Var> inputs{x, w};
  if (b != nullptr) inputs.push_back(*b);
  const Var bias = b != nullptr ? *b : Var{};
  return x.tape().record("linear", std::move(out), inputs, [x, w, bias](BackwardContext& ctx) {
    const auto g = ctx.out_grad().mat();
    if (auto* gx = ctx.grad_of(x)) gx->mat().noalias() += g * w.value().mat();
    ctx.accumulate_outer(w, ctx.out_grad(), x.value());
    if (bias.valid()) {
      if (auto* gb = ctx.grad_of(bias)) gb->mat().row(0) += g.colwise().sum();
    }
  });
}

}  // namespace

Var linear(const Var& x, const Var& w) { return linear_impl(x, w, nullptr); }
Var linear(const Var& x, const Var& w, const Var& b) { return linear_impl(x, w, &b); }

Var add(const Var& a, const Var& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.shape() != bv.shape()) shape_error("add", av.shape(), bv.shape());
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  const Var in[] = {a, b};
  return a.tape().record("add", std::move(out), in, [a, b](BackwardContext& ctx) {
    const auto& g = ctx.out_grad();
    for (const auto& v : {a, b}) {
      if (auto* gv = ctx.grad_of(v))
        for (std::size_t i = 0; i < g.size(); ++i) (*gv)[i] += g[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.shape() != bv.shape()) shape_error("sub", av.shape(), bv.shape());
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  const Var in[] = {a, b};
  return a.tape().record("sub", std::move(out), in, [a, b](BackwardContext& ctx) {
    const auto& g = ctx.out_grad();
    if (auto* ga = ctx.grad_of(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    if (auto* gb = ctx.grad_of(b))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
  });
}

Var mul(const Var& a, const Var& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.shape() != bv.shape()) shape_error("mul", av.shape(), bv.shape());
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  const Var in[] = {a, b};
  return a.tape().record("mul", std::move(out), in, [a, b](BackwardContext& ctx) {
    const auto& g = ctx.out_grad();
    if (auto* ga = ctx.grad_of(a)) {
      const auto& bv = b.value();
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
    }
    if (auto* gb = ctx.grad_of(b)) {
      const auto& av = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  return elementwise_unary(
      "scale", a, [factor](double v) { return v * factor; },
      [a, factor](BackwardContext& ctx) {
        const auto& g = ctx.out_grad();
        if (auto* ga = ctx.grad_of(a))
          for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += factor * g[i];
      });
}

Var sigmoid(const Var& a) {
  return elementwise_unary(
      "sigmoid", a, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [a](BackwardContext& ctx) {
        const auto& g = ctx.out_grad();
        const auto& y = ctx.out_value();
        if (auto* ga = ctx.grad_of(a))
          for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * y[i] * (1.0 - y[i]);
      });
}

Var tanh(const Var& a) {
  return elementwise_unary(
      "tanh", a, [](double v) { return std::tanh(v); },
      [a](BackwardContext& ctx) {
        const auto& g = ctx.out_grad();
        const auto& y = ctx.out_value();
        if (auto* ga = ctx.grad_of(a))
          for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * (1.0 - y[i] * y[i]);
      });
}

Var softmax(const Var& a, std::size_t axis) {
  const auto& av = a.value();
  require_rank("softmax", av, 1, 2);
  require(axis < av.rank(), ErrorKind::kShape,
          "softmax: axis " + std::to_string(axis) + " out of range for " +
              shape_string(av.shape()));
  // Rank 1 is a single row; rank 2 along axis 0 works on the transpose.
  const bool by_column = av.rank() == 2 && axis == 0;
  Tensor out(av.shape());
  Matrix x = by_column ? Matrix(av.mat().transpose()) : Matrix(av.mat());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  if (by_column) out.mat() = x.transpose(); else out.mat() = x;
  const Var in[] = {a};
  return a.tape().record("softmax", std::move(out), in, [a, by_column](BackwardContext& ctx) {
    auto* ga = ctx.grad_of(a);
    if (ga == nullptr) return;
    Matrix y = by_column ? Matrix(ctx.out_value().mat().transpose()) : Matrix(ctx.out_value().mat());
    Matrix g = by_column ? Matrix(ctx.out_grad().mat().transpose()) : Matrix(ctx.out_grad().mat());
    Matrix dx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = y.row(r).dot(g.row(r));
      dx.row(r) = y.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
    if (by_column) ga->mat() += dx.transpose(); else ga->mat() += dx;
  });
}

Var mean(const Var& a, std::size_t axis) {
  const auto& av = a.value();
  require_rank("mean", av, 1, 2);
  require(axis < av.rank(), ErrorKind::kShape,
          "mean: axis " + std::to_string(axis) + " out of range for " + shape_string(av.shape()));
  Tensor out;
  if (av.rank() == 1) {
    out = Tensor::scalar(av.mat().sum() / static_cast<double>(av.size()));
  } else if (axis == 0) {
    out = Tensor({av.shape()[1]});
    out.mat().row(0) = av.mat().colwise().mean();
  } else {
    out = Tensor({av.shape()[0]});
    out.mat().row(0) = av.mat().rowwise().mean().transpose();
  }
  const Var in[] = {a};
  return a.tape().record("mean", std::move(out), in, [a, axis](BackwardContext& ctx) {
    auto* ga = ctx.grad_of(a);
    if (ga == nullptr) return;
    const auto& g = ctx.out_grad();
    auto gm = ga->mat();
    if (ga->rank() == 1) {
      gm.array() += g.item() / static_cast<double>(ga->size());
    } else if (axis == 0) {
      const double n = static_cast<double>(ga->shape()[0]);
      gm.rowwise() += g.mat().row(0) / n;
    } else {
      const double n = static_cast<double>(ga->shape()[1]);
      gm.colwise() += g.mat().row(0).transpose() / n;
    }
  });
}

Var sum(const Var& a) {
  const auto& av = a.value();
  double s = 0.0;
  for (double v : av.data()) s += v;
  const Var in[] = {a};
  return a.tape().record("sum", Tensor::scalar(s), in, [a](BackwardContext& ctx) {
    if (auto* ga = ctx.grad_of(a)) {
      const double g = ctx.out_grad().item();
      for (auto& v : ga->data()) v += g;
    }
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  require(!parts.empty(), ErrorKind::kShape, "concat: no inputs");
  const auto& first = parts.front().value();
  require_rank("concat", first, 1, 2);
  require(axis < first.rank(), ErrorKind::kShape, "concat: axis out of range");
  // Treat everything as a matrix; rank 1 concatenates along columns.
  const bool along_cols = first.rank() == 1 || axis == 1;
  Eigen::Index rows = static_cast<Eigen::Index>(first.rows());
  Eigen::Index cols = static_cast<Eigen::Index>(first.cols());
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    if (v.rank() != first.rank()) shape_error("concat", first.shape(), v.shape());
    if (along_cols && static_cast<Eigen::Index>(v.rows()) != rows)
      shape_error("concat", first.shape(), v.shape());
    if (!along_cols && static_cast<Eigen::Index>(v.cols()) != cols)
      shape_error("concat", first.shape(), v.shape());
    total += static_cast<Eigen::Index>(along_cols ? v.cols() : v.rows());
  }
  Shape shape;
  if (first.rank() == 1) shape = {static_cast<std::size_t>(total)};
  else if (along_cols) shape = {static_cast<std::size_t>(rows), static_cast<std::size_t>(total)};
  else shape = {static_cast<std::size_t>(total), static_cast<std::size_t>(cols)};
  Tensor out(shape);
  auto om = out.mat();
  std::vector<std::pair<Eigen::Index, Eigen::Index>> spans;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    const auto pm = p.value().mat();
    if (along_cols) {
      om.middleCols(at, pm.cols()) = pm;
      spans.emplace_back(at, pm.cols());
      at += pm.cols();
    } else {
      om.middleRows(at, pm.rows()) = pm;
      spans.emplace_back(at, pm.rows());
      at += pm.rows();
    }
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().tape().record(
      "concat", std::move(out), inputs, [inputs, spans, along_cols](BackwardContext& ctx) {
        const auto g = ctx.out_grad().mat();
        for (std::size_t i = 0; i < inputs.size(); ++i) {
          auto* gi = ctx.grad_of(inputs[i]);
          if (gi == nullptr) continue;
          const auto [from, len] = spans[i];
          if (along_cols) gi->mat() += g.middleCols(from, len);
          else gi->mat() += g.middleRows(from, len);
        }
      });
}

Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto& av = a.value();
  require_rank("slice", av, 1, 2);
  if (!(axis < av.rank() && begin < end && end <= av.shape()[axis]))
    fail(ErrorKind::kShape, "slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
              ") on axis " + std::to_string(axis) + " invalid for " + shape_string(av.shape()));
  const bool along_cols = av.rank() == 1 || axis == 1;
  const auto from = static_cast<Eigen::Index>(begin);
  const auto len = static_cast<Eigen::Index>(end - begin);
  Shape shape = av.shape();
  shape[axis] = end - begin;
  Tensor out(shape);
  if (along_cols) out.mat() = av.mat().middleCols(from, len);
  else out.mat() = av.mat().middleRows(from, len);
  const Var in[] = {a};
  return a.tape().record("slice", std::move(out), in,
                         [a, along_cols, from, len](BackwardContext& ctx) {
                           auto* ga = ctx.grad_of(a);
                           if (ga == nullptr) return;
                           if (along_cols) ga->mat().middleCols(from, len) += ctx.out_grad().mat();
                           else ga->mat().middleRows(from, len) += ctx.out_grad().mat();
                         });
}

Var reshape(const Var& a, Shape shape) {
  const auto& av = a.value();
  if (element_count(shape) != av.size()) shape_error("reshape", av.shape(), shape);
  Tensor out(std::move(shape), std::vector<double>(av.data().begin(), av.data().end()));
  const Var in[] = {a};
  return a.tape().record("reshape", std::move(out), in, [a](BackwardContext& ctx) {
    if (auto* ga = ctx.grad_of(a)) {
      const auto& g = ctx.out_grad();
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    }
  });
}

Var cosine_distance(const Var& u, const Var& v) {
  const auto& uv = u.value();
  const auto& vv = v.value();
  if (uv.size() != vv.size() || uv.size() == 0) shape_error("cosine_distance", uv.shape(), vv.shape());
  double dot = 0.0, nu2 = 0.0, nv2 = 0.0;
  for (std::size_t i = 0; i < uv.size(); ++i) {
    dot += uv[i] * vv[i];
    nu2 += uv[i] * uv[i];
    nv2 += vv[i] * vv[i];
  }
  require(nu2 > 0.0 && nv2 > 0.0, ErrorKind::kNumeric,
          "cosine_distance: zero-norm vector (collapsed encoding)");
  const double nu = std::sqrt(nu2), nv = std::sqrt(nv2);
  const double cos = dot / (nu * nv);
  const Var in[] = {u, v};
  return u.tape().record(
      "cosine_distance", Tensor::scalar(1.0 - cos), in,
      [u, v, nu, nv, cos](BackwardContext& ctx) {
        const double g = ctx.out_grad().item();
        const auto& a = u.value();
        const auto& b = v.value();
        // d(cos)/du = b/(|u||v|) − cos·u/|u|², and symmetrically for v.
        if (auto* gu = ctx.grad_of(u))
          for (std::size_t i = 0; i < a.size(); ++i)
            (*gu)[i] -= g * (b[i] / (nu * nv) - cos * a[i] / (nu * nu));
        if (auto* gv = ctx.grad_of(v))
          for (std::size_t i = 0; i < a.size(); ++i)
            (*gv)[i] -= g * (a[i] / (nu * nv) - cos * b[i] / (nv * nv));
      });
}

Var mse(const Var& a, const Var& b, std::span<const std::uint8_t> mask) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.shape() != bv.shape() || av.rank() != 2) shape_error("mse", av.shape(), bv.shape());
  require(mask.size() == av.rows(), ErrorKind::kShape,
          "mse: mask length " + std::to_string(mask.size()) + " != steps " +
              std::to_string(av.rows()));
  const std::size_t valid = static_cast<std::size_t>(std::count_if(
      mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }));
  require(valid > 0, ErrorKind::kInvalidArgument, "mse: mask selects no steps");
  const double count = static_cast<double>(valid * av.cols());
  double total = 0.0;
  for (std::size_t r = 0; r < av.rows(); ++r) {
    if (!mask[r]) continue;
    total += (av.mat().row(static_cast<Eigen::Index>(r)) - bv.mat().row(static_cast<Eigen::Index>(r)))
                 .squaredNorm();
  }
  std::vector<std::uint8_t> keep(mask.begin(), mask.end());
  const Var in[] = {a, b};
  return a.tape().record("mse", Tensor::scalar(total / count), in,
                         [a, b, keep, count](BackwardContext& ctx) {
                           const double g = ctx.out_grad().item();
                           const auto diff = (a.value().mat() - b.value().mat()).eval();
                           auto* ga = ctx.grad_of(a);
                           auto* gb = ctx.grad_of(b);
                           for (std::size_t r = 0; r < keep.size(); ++r) {
                             if (!keep[r]) continue;
                             const auto row = static_cast<Eigen::Index>(r);
                             if (ga) ga->mat().row(row) += (2.0 * g / count) * diff.row(row);
                             if (gb) gb->mat().row(row) -= (2.0 * g / count) * diff.row(row);
                           }
                         });
}

Var sequence_mse(std::span<const Var> outputs, std::span<const Tensor> targets,
                 std::span<const std::size_t> lengths) {
  require(!outputs.empty() && outputs.size() == targets.size(), ErrorKind::kShape,
          "sequence_mse: outputs/targets step count mismatch");
  const std::size_t k = lengths.size();
  const std::size_t d = outputs.front().value().cols();
  for (std::size_t t = 0; t < outputs.size(); ++t) {
    const auto& o = outputs[t].value();
    if (o.shape() != targets[t].shape() || o.rank() != 2 || o.rows() != k || o.cols() != d)
      shape_error("sequence_mse", o.shape(), targets[t].shape());
  }
  for (auto len : lengths) {
    require(len >= 1 && len <= outputs.size(), ErrorKind::kShape,
            "sequence_mse: row length " + std::to_string(len) + " outside [1, " +
                std::to_string(outputs.size()) + "]");
  }
  Tensor out({k});
  for (std::size_t t = 0; t < outputs.size(); ++t) {
    const auto o = outputs[t].value().mat();
    const auto x = targets[t].mat();
    for (std::size_t i = 0; i < k; ++i) {
      if (t >= lengths[i]) continue;
      const auto r = static_cast<Eigen::Index>(i);
      out[i] += (o.row(r) - x.row(r)).squaredNorm();
    }
  }
  for (std::size_t i = 0; i < k; ++i) out[i] /= static_cast<double>(lengths[i] * d);

  std::vector<Var> inputs(outputs.begin(), outputs.end());
  std::vector<std::size_t> lens(lengths.begin(), lengths.end());
  // Targets are constant data; the closure keeps its own copy alive.
  auto held = std::make_shared<std::vector<Tensor>>(targets.begin(), targets.end());
  return inputs.front().tape().record(
      "sequence_mse", std::move(out), inputs, [inputs, lens, held, d](BackwardContext& ctx) {
        const auto& g = ctx.out_grad();
        for (std::size_t t = 0; t < inputs.size(); ++t) {
          auto* gt = ctx.grad_of(inputs[t]);
          if (gt == nullptr) continue;
          const auto o = inputs[t].value().mat();
          const auto x = (*held)[t].mat();
          for (std::size_t i = 0; i < lens.size(); ++i) {
            if (t >= lens[i]) continue;
            const auto r = static_cast<Eigen::Index>(i);
            const double w = 2.0 * g[i] / static_cast<double>(lens[i] * d);
            gt->mat().row(r) += w * (o.row(r) - x.row(r));
          }
        }
      });
}

std::vector<double> attention_weights(std::span<const Tensor> states, const Tensor& a,
                                      std::size_t row, std::size_t length) {
  require(length >= 1 && length <= states.size(), ErrorKind::kShape,
          "attention: length outside [1, steps]");
  std::vector<double> w(length);
  const auto av = a.mat().row(0);
  const auto r = static_cast<Eigen::Index>(row);
  double top = -INFINITY;
  for (std::size_t t = 0; t < length; ++t) {
    w[t] = states[t].mat().row(r).dot(av);
    top = std::max(top, w[t]);
  }
  double z = 0.0;
  for (auto& v : w) z += (v = std::exp(v - top));
  for (auto& v : w) v /= z;
  return w;
}

Var attention_pool(std::span<const Var> states, const Var& a,
                   std::span<const std::size_t> lengths) {
  require(!states.empty(), ErrorKind::kShape, "attention_pool: no steps");
  const auto& s0 = states.front().value();
  const std::size_t k = s0.rows();
  const std::size_t h = s0.cols();
  if (s0.rank() != 2 || lengths.size() != k) shape_error("attention_pool", s0.shape(), a.shape());
  if (a.value().rank() != 1 || a.value().size() != h)
    shape_error("attention_pool", s0.shape(), a.value().shape());
  std::vector<Tensor> values;
  values.reserve(states.size());
  for (const auto& s : states) {
    if (s.value().shape() != s0.shape()) shape_error("attention_pool", s0.shape(), s.shape());
    values.push_back(s.value());
  }

  Tensor out({k, h});
  std::vector<std::vector<double>> alphas(k);
  for (std::size_t i = 0; i < k; ++i) {
    alphas[i] = attention_weights(values, a.value(), i, lengths[i]);
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t t = 0; t < lengths[i]; ++t)
      out.mat().row(r) += alphas[i][t] * values[t].mat().row(r);
  }

  std::vector<Var> inputs(states.begin(), states.end());
  inputs.push_back(a);
  return a.tape().record(
      "attention_pool", std::move(out), inputs, [inputs, alphas](BackwardContext& ctx) {
        const Var& a = inputs.back();
        const auto av = a.value().mat().row(0);
        auto* ga = ctx.grad_of(a);
        const auto g = ctx.out_grad().mat();
        for (std::size_t i = 0; i < alphas.size(); ++i) {
          const auto r = static_cast<Eigen::Index>(i);
          const auto& alpha = alphas[i];
          const auto gi = g.row(r);
          // dα_t = g·h_t ; ds_t = α_t (dα_t − Σ_j α_j dα_j)
          std::vector<double> dalpha(alpha.size());
          double avg = 0.0;
          for (std::size_t t = 0; t < alpha.size(); ++t) {
            dalpha[t] = gi.dot(inputs[t].value().mat().row(r));
            avg += alpha[t] * dalpha[t];
          }
          for (std::size_t t = 0; t < alpha.size(); ++t) {
            const double ds = alpha[t] * (dalpha[t] - avg);
            if (auto* gh = ctx.grad_of(inputs[t]))
              gh->mat().row(r) += alpha[t] * gi + ds * av;
            if (ga) ga->mat().row(0) += ds * inputs[t].value().mat().row(r);
          }
        }
      });
}

}  // namespace tc::ad
