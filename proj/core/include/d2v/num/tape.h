#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "d2v/num/tensor.h"

namespace d2v::num {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while its tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

// Records operations in execution order; the recording order is a
// topological order, so backward() is a single reverse sweep.
//
// Gradient policy: backward() may be called once per tape. Gradients of
// parameters referenced on the tape are *added* into Parameter::grad
// (allocated as zeros when absent); parameters without a path to the loss
// end up with an all-zero gradient. The optimizer zeroes them after a step.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // A non-parameter leaf whose gradient can be read back after backward().
  Var variable(Tensor value);
  // Leaf bound to a trainable parameter. Repeated calls return the same node.
  Var param(Parameter& p);

  void backward(Var loss);
  bool backward_done() const { return backward_done_; }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient of a leaf after backward(); zeros when no path reached it.
  std::vector<double> grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

  // --- op-author interface ---
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);
  // Gradient buffer of a node, allocated on first use.
  std::vector<double>& grad_buffer(std::size_t id);
  // Gradient buffer of an input, or nullptr when that input needs no gradient.
  double* input_grad(std::size_t id);

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::vector<std::pair<Parameter*, std::size_t>> param_nodes_;
  bool backward_done_ = false;
};

// ---- primitive ops (all operate on rank-2 tensors) ----

Var matmul(Var a, Var b);        // [n,k] x [k,m]
Var matmul_nt(Var a, Var w);     // [n,k] x [m,k]^T, weights stored [out,in]
Var add(Var a, Var b);           // same shape
Var add_row(Var a, Var bias);    // [n,m] + broadcast [1,m]
Var sub(Var a, Var b);
Var mul(Var a, Var b);           // elementwise
Var scale(Var a, double s);
Var one_minus(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var softmax_rows(Var a);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t start, std::size_t len);
Var slice_rows(Var a, std::size_t start, std::size_t len);
Var gather_rows(Var a, std::span<const std::size_t> index);
// out[i] = sum of table rows listed in bags[i]. Table is [V, d].
Var embedding_bag(Var table, std::span<const std::vector<std::uint32_t>> bags);
Var row_sum(Var a);              // [n,m] -> [n,1]
Var sum(Var a);                  // -> [1,1]
Var mean(Var a);                 // -> [1,1]
Var square_sum(Var a);           // -> [1,1]
// Softmax of a column of scores within contiguous segments.
// offsets has one more entry than there are segments.
Var segment_softmax(Var scores, std::span<const std::size_t> offsets);
// out[s] = sum_{i in segment s} weights[i] * values[i]; weights is [n,1].
Var segment_weighted_sum(Var values, Var weights, std::span<const std::size_t> offsets);

// Mean categorical cross-entropy of probability rows against class targets.
// log() is taken of max(p, kProbabilityFloor).
inline constexpr double kProbabilityFloor = 1e-12;
Var cross_entropy(Var probs, std::span<const int> targets);
// Mean squared error of a [n,1] prediction column.
Var mse(Var pred, std::span<const double> target);

// Non-tape softmax used by tests and metric code.
std::vector<double> softmax(std::span<const double> x);

}  // namespace d2v::num
