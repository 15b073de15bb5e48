// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "blur.hpp"
#include "tensor.hpp"

namespace sardiff {

/// Reverse-mode tape over NCHW tensors. Nodes are appended in evaluation
/// order, so a reverse sweep is a valid topological order. Values and
/// gradients of interior nodes are released as soon as the sweep has passed
/// them.
template <class T>
class Tape {
 public:
  using Var = int;
  static constexpr Var kNone = -1;

  /// With record == false no backward closures are kept (inference).
  explicit Tape(bool record = true) : record_(record) {}

  Var constant(Tensor<T> value) { return push(std::move(value), false); }
  Var leaf(Tensor<T> value) { return push(std::move(value), record_); }

  const Tensor<T>& value(Var v) const { return nodes_[v].value; }
  /// Gradient of a node after backward(); zeros if nothing flowed into it.
  Tensor<T> take_grad(Var v);

  /// Seeds d(out)/d(out) = 1 for a scalar output and sweeps the tape.
  void backward(Var out);

  // ---- ops --------------------------------------------------------------
  /// Square kernel, zero padding k/2, stride 1 or 2. bias may be kNone.
  Var conv2d(Var x, Var weight, Var bias, int stride = 1);
  Var group_norm(Var x, Var gamma, Var beta, int groups, double eps = 1e-5);
  Var silu(Var x);
  Var add(Var a, Var b);
  /// x (N,C,H,W) + v (N,C,1,1) broadcast over space.
  Var add_channel_bias(Var x, Var v);
  /// x (N,D,1,1), weight (O,D,1,1), bias (1,O,1,1) -> (N,O,1,1).
  Var linear(Var x, Var weight, Var bias);
  Var concat_channels(Var a, Var b);
  Var upsample_nearest2x(Var x);
  /// Single-head dot-product attention over spatial positions; q, k, v are
  /// (N,C,H,W) and the output has the same shape.
  Var attention(Var q, Var k, Var v);
  /// y_n = scale[n] * x_n + offset_n (offset constant, same shape as x).
  Var affine_per_sample(Var x, std::vector<T> scale, const Tensor<T>& offset);
  Var blur(Var x, const BlurSpec& spec);
  /// Mean of (x - target)^2 over all elements, shape (1,1,1,1).
  Var mse(Var x, const Tensor<T>& target);
  /// a + weight * b for scalars.
  Var weighted_sum(Var a, Var b, T weight);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    bool is_leaf = false;
    std::function<void(Var self)> backward;
  };

  Var push(Tensor<T> value, bool requires_grad);
  Var push_op(Tensor<T> value, std::initializer_list<Var> inputs,
              std::function<void(Var self)> backward);
  bool needs(Var v) const { return v != kNone && nodes_[v].requires_grad; }
  /// Gradient accumulator for v, zero-initialised on first use.
  Tensor<T>& grad(Var v);

  bool record_;
  std::vector<Node> nodes_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace sardiff
