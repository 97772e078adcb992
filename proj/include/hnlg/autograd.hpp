// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "hnlg/tensor.hpp"

namespace hnlg::numkit {

class Graph;

/// Handle to a value recorded on a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Reverse-mode tape. Every operation appends a node holding its value and a
/// closure that pushes the node's gradient into its inputs.
///
/// Parameters enter through `param()`, which binds a node to a caller-owned
/// Tensor; `backward()` adds into that Tensor's grad buffer, so repeated
/// backward calls accumulate until the caller clears the gradients.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  /// With `record == false` no backward closures are kept (inference).
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Same Tensor object maps to the same node for the lifetime of the graph.
  Var param(Tensor& parameter);

  Var push(Tensor value, std::span<const std::size_t> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of a node; valid during and after `backward()`.
  std::vector<double>& grad(std::size_t id) { return nodes_[id].grad; }
  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// `loss` must be a single-element tensor.
  void backward(Var loss);

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    BackwardFn backward;
    Tensor* parameter = nullptr;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;
  std::unordered_map<const Tensor*, std::size_t> param_ids_;
  bool record_;
};

// Forward operations. Binary elementwise operations accept an equal-shaped
// right operand or one that broadcasts: a row [1 x n], a column [m x 1], or a
// single element.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var one_minus(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var concat_lastdim(std::span<const Var> parts);
Var slice_lastdim(Var a, std::size_t begin, std::size_t count);
Var softmax_lastdim(Var a);
/// Row-wise inner product of two [m x n] inputs; result is [m x 1].
Var row_dot(Var a, Var b);
/// Sum of all elements as a single-element tensor.
Var sum(Var a);
/// Gathers rows of `table` [V x d] into an [ids.size() x d] result.
Var embedding(Var table, std::span<const int> ids);
/// Sum over rows with mask[r] != 0 of -log softmax(logits[r])[targets[r]].
Var masked_nll_sum(Var logits, std::span<const int> targets, std::span<const double> mask);

enum class OpKind { sigmoid, tanh, add, mul, concat_lastdim, softmax_lastdim };
/// Dispatches to the named operation; unary kinds take one input, add and mul
/// take two, concat takes any nonzero number.
Var elementwise(OpKind kind, std::span<const Var> inputs);

/// Greedy choice per row with lowest-index tie break.
std::vector<int> argmax_rows(const Tensor& t);

}  // namespace hnlg::numkit
