#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "wuneng/tensor.hpp"

/// Eager reverse-mode differentiation over TensorD values.
///
/// Every op computes its value immediately and, when the graph records,
/// appends a closure that scatters the node's gradient into its parents.
/// Nodes are appended in topological order, so `backward` is a single
/// reverse sweep.
namespace wuneng::ad {

class Graph;

struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  bool valid() const noexcept { return graph != nullptr; }
  const TensorD& value() const;
};

class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  /// With `record == false` no closures are kept; values only.
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(TensorD value);
  Var parameter(TensorD value);
  /// Appends a derived node. The node needs a gradient iff any parent does.
  Var emit(TensorD value, std::initializer_list<Var> parents, BackwardFn fn);
  Var emit(TensorD value, std::span<const Var> parents, BackwardFn fn);

  const TensorD& value(Var v) const { return nodes_[v.id].value; }
  const TensorD& value(std::size_t id) const { return nodes_[id].value; }
  /// Gradient of the last `backward` loss; zeros when nothing flowed in.
  TensorD grad(Var v) const;
  const TensorD& grad_ref(std::size_t id) const { return nodes_[id].grad; }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  /// Adds `delta` into the gradient of `v` when `v` needs one.
  void accumulate(Var v, const TensorD& delta);
  void accumulate(Var v, TensorD&& delta);
  /// Mutable gradient buffer of `v`, zero-initialised on first use.
  TensorD& grad_buffer(Var v);

  /// Seeds d(loss)/d(loss) = 1 and sweeps backwards. `loss` must hold a
  /// single element.
  void backward(Var loss);

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    TensorD value;
    TensorD grad;
    bool needs_grad = false;
    BackwardFn backward;
  };

  Var push(Node node);

  bool record_;
  std::vector<Node> nodes_;
};

// Linear algebra.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// a + bias, with a rank-1 bias broadcast over rows.
Var add_bias(Var a, Var bias);
/// a * s for a single-element tensor s.
Var scale(Var a, Var s);
Var scale(Var a, double c);
Var one_minus(Var a);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t start, std::size_t width);
/// Rows [start, start + count) of a matrix.
Var slice_rows(Var a, std::size_t start, std::size_t count);

// Elementwise nonlinearities.
Var sigmoid(Var a);
Var relu_squared(Var a);
Var softplus(Var a);
Var exp(Var a);
Var neg(Var a);

/// Row-wise x / ||x||; all-zero rows map to zero with zero gradient.
Var l2_normalize_rows(Var a);
Var layer_norm_rows(Var x, Var scale, Var shift, double eps);

/// Rows of `table` selected by `ids`.
Var embedding(Var table, std::span<const int> ids);

/// Mean token cross-entropy over rows with mask 1; 0 when no row is masked in.
Var masked_cross_entropy(Var logits, std::span<const int> targets,
                         std::span<const double> mask);
Var sum(Var a);
Var sum_squares(Var a);

}  // namespace wuneng::ad
