#pragma once

// Minimal reverse-mode automatic differentiation over Tensor values.
//
// A Var is a handle to a graph node. Operations on Vars that require
// gradients record a backward closure; Var::backward() on a scalar root
// walks the graph in reverse topological order and accumulates gradients
// into every reachable node that requires them. Parameter gradients
// persist until zero_grad(); intermediate nodes are freed with their Vars.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "emoconv/tensor.hpp"

namespace emoconv::ad {

struct Node {
  Tensor value;
  Tensor grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  // Gradient storage shaped like `value`, zero-initialised on first use.
  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  // Zero tensor shaped like value when no gradient has been accumulated.
  Tensor grad() const;
  void zero_grad();

  // Root must hold exactly one element; its gradient is seeded with 1.
  void backward() const;
  Var detach() const;

  Node* node() const noexcept { return node_.get(); }
  const std::shared_ptr<Node>& shared() const noexcept { return node_; }

  // Convenience for scalar results.
  double item() const;

 private:
  std::shared_ptr<Node> node_;
};

bool grad_enabled() noexcept;

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

Var constant(Tensor value);
Var parameter(Tensor value);

// Building block for custom differentiable operations. The closure receives
// the result node; its `grad` is populated and parents are in input order.
// When no input requires gradients (or recording is disabled) the closure is
// dropped and the result is a constant.
Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

// Elementwise ---------------------------------------------------------------

Var add(const Var& a, const Var& b);
Var scale(const Var& x, double s);
Var affine(const Var& x, double s, double b);
Var leaky_relu(const Var& x, double slope);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var reshape(const Var& x, Shape shape);

// Convolution and resampling ------------------------------------------------

struct Conv1dSpec {
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;
  std::size_t groups = 1;
};

std::size_t conv1d_out_len(std::size_t len, std::size_t kernel, const Conv1dSpec& spec);

// x [B, Cin, L], w [Cout, Cin/groups, K], bias [Cout] or undefined.
Var conv1d(const Var& x, const Var& w, const Var& bias, const Conv1dSpec& spec);

// x [B, Cin, L], w [Cin, Cout, K]. The full transposed output has length
// (L-1)*stride + K; samples [crop_left, crop_left + out_len) are returned.
Var conv_transpose1d(const Var& x, const Var& w, const Var& bias, std::size_t stride,
                     std::size_t crop_left, std::size_t out_len);

// Zero-padded average pooling; padding counts toward the divisor.
Var avg_pool1d(const Var& x, std::size_t kernel, std::size_t stride, std::size_t pad);

// [B, C, T] -> [B*period, C, ceil(T/period)]. The tail is reflection-padded to a
// multiple of the period; sequence b*period + j holds samples j, j+period, ...
Var fold_period(const Var& x, std::size_t period);

// Dense ---------------------------------------------------------------------

// x [N, Din], w [Dout, Din], b [Dout] -> [N, Dout]
Var linear(const Var& x, const Var& w, const Var& b);
// table [K, D] -> [indices.size(), D]
Var embedding(const Var& table, std::span<const int> indices);
// Mean over the last axis.
Var mean_last(const Var& x);

// Reductions to a scalar ----------------------------------------------------

Var sum(const Var& x);
// sum_i (target - x_i)^2
Var sum_sq_dev(const Var& x, double target);
// sum_i |a_i - b_i|
Var l1_distance(const Var& a, const Var& b);
// sum_k w_k * terms_k over scalar terms
Var weighted_sum(std::span<const Var> terms, std::span<const double> weights);

// Concordance correlation coefficient of two equal-length vectors, with
// population moments. Zero (with zero gradient) when the denominator vanishes.
Var ccc(const Var& x, const Var& y);

}  // namespace emoconv::ad
