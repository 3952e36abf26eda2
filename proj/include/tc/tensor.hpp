// SPDX-License-Identifier: Apache-2.0
//
// Dense double-precision tensors with a reverse-mode tape.
//
// Values live in row-major storage; rank-0/1/2 tensors can be viewed as
// Eigen matrices (rank 1 as a single row). Every op appends one node to the
// tape holding its value and a backward closure. Tape::backward walks the
// nodes in reverse creation order, so each node is visited once, and
// parameter leaves accumulate into Tensor::grad().
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace tc::ad {

using Shape = std::vector<std::size_t>;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);
  static Tensor scalar(double v) { return Tensor({}, std::vector<double>{v}); }
  static Tensor from_matrix(const Matrix& m);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double item() const;

  MatrixMap mat();
  ConstMatrixMap mat() const;

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on);
  /// Gradient buffer, same shape; allocated (zeroed) when requires_grad is set.
  Tensor& grad();
  const Tensor& grad() const;
  void zero_grad();

  bool all_finite() const;

 private:
  Shape shape_;
  // Fixed alignment keeps the vectorized kernels on the same code path for
  // every allocation, so results do not depend on heap layout.
  std::vector<double, Eigen::aligned_allocator<double>> data_;
  bool requires_grad_ = false;
  std::vector<Tensor> grad_;  // zero or one element; avoids a recursive member
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Passed to backward closures: upstream gradient plus accumulators for the
/// inputs. grad_of() returns nullptr for inputs that need no gradient.
class BackwardContext {
 public:
  BackwardContext(Tape& tape, std::uint32_t node) : tape_(tape), node_(node) {}
  const Tensor& out_grad() const;
  const Tensor& out_value() const;
  Tensor* grad_of(const Var& input);
  /// Queues grad(input) += gᵀ·x. Queued products for a node are summed with
  /// one stacked GEMM when the sweep reaches it, instead of one
  /// read-modify-write of the gradient per use. g and x must stay alive
  /// until then (node values and gradients do).
  void accumulate_outer(const Var& input, const Tensor& g, const Tensor& x);

 private:
  Tape& tape_;
  std::uint32_t node_;
};

using BackwardFn = std::function<void(BackwardContext&)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to external parameter storage; backward accumulates into
  /// param.grad(). The tensor must outlive the tape.
  Var parameter(Tensor& param);

  /// Used by op implementations. Throws kNumeric if the value is not finite.
  Var record(std::string_view op, Tensor value, std::span<const Var> inputs,
             BackwardFn backward);

  const Tensor& value(std::uint32_t id) const { return nodes_[id].value; }
  bool needs_grad(std::uint32_t id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a scalar. A tape can be swept once.
  void backward(const Var& loss);
  /// Gradient of a node after backward (zeros if it received none).
  Tensor grad(const Var& v) const;
  /// Number of nodes whose backward closure ran in the last sweep.
  std::size_t backward_visits() const { return visits_; }

 private:
  friend class BackwardContext;
  struct Node {
    std::string_view op;
    Tensor value;
    Tensor grad;  // empty until something flows in
    Tensor* param = nullptr;
    bool needs_grad = false;
    BackwardFn backward;
    std::vector<std::pair<const Tensor*, const Tensor*>> pending_outer;
  };
  Tensor& grad_slot(std::uint32_t id);
  void flush_outer(Node& node);

  std::deque<Node> nodes_;  // stable references while recording
  bool swept_ = false;
  std::size_t visits_ = 0;
};

// ---- forward ops -----------------------------------------------------------

Var matmul(const Var& a, const Var& b);
/// x·Wᵀ (+ b): x [m×in], W [out×in], b [out].
Var linear(const Var& x, const Var& w);
Var linear(const Var& x, const Var& w, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
/// Softmax along an axis of a rank-1 or rank-2 tensor, max-subtracted.
Var softmax(const Var& a, std::size_t axis);
/// Mean along an axis; rank 1 reduces to a scalar.
Var mean(const Var& a, std::size_t axis);
Var sum(const Var& a);
Var concat(std::span<const Var> parts, std::size_t axis);
Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end);
/// Same data, new shape with equal element count.
Var reshape(const Var& a, Shape shape);

/// 1 − u·v/(‖u‖‖v‖) over the flattened inputs. Zero norm is an error.
Var cosine_distance(const Var& u, const Var& v);
/// Mean squared difference over the rows of [T×d] inputs whose mask is set.
Var mse(const Var& a, const Var& b, std::span<const std::uint8_t> mask);
/// Batched variant over time steps. outputs[t], targets[t] are [k×d];
/// row i is valid while t < lengths[i]. Returns [k] per-row MSE.
Var sequence_mse(std::span<const Var> outputs, std::span<const Tensor> targets,
                 std::span<const std::size_t> lengths);
/// Global attention pooling. states[t] are [k×h], a is [h]. Row i uses
/// steps t < lengths[i]: α = softmax(h_t·a), result row = Σ α_t h_t.
Var attention_pool(std::span<const Var> states, const Var& a,
                   std::span<const std::size_t> lengths);
/// Attention weights for one row of the pooled states (values only).
std::vector<double> attention_weights(std::span<const Tensor> states, const Tensor& a,
                                      std::size_t row, std::size_t length);

}  // namespace tc::ad
