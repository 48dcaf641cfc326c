// Reverse-mode automatic differentiation over a tape of tensor operations.
//
// A Graph records operations in execution order; backward() walks the tape
// in reverse, which is a reverse topological order by construction, and
// accumulates gradients into every node that leads back to a parameter.
// Graphs are single-use per forward/backward pass and are not thread-safe;
// build one graph per sample and per thread.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "embryostage/tensor.hpp"

namespace embryostage::ad {

class Graph {
 public:
  using NodeId = std::int32_t;

  /// Leaf that does not require gradients (e.g. the input cloud, targets).
  NodeId input(Tensor value);

  /// Parameter leaf. The tensor is borrowed, not copied; it must outlive the
  /// graph. Gradients accumulate into the graph, never into the parameter.
  NodeId param(const Tensor* value);

  /// C[m,n] = A[m,k] * B[k,n].
  NodeId matmul(NodeId a, NodeId b);

  /// Adds a bias row vector [c] (or [1,c]) to every row of x [n,c].
  NodeId add_bias(NodeId x, NodeId bias);

  /// Elementwise max(v, 0). Backward passes gradient where the input is > 0.
  NodeId relu(NodeId x);

  /// Column-wise max over the rows of x [n,c] -> [1,c]. Backward routes each
  /// channel's gradient to its argmax row; ties resolve to the lowest row.
  NodeId max_over_points(NodeId x);

  /// Same data, new shape (sizes must match).
  NodeId reshape(NodeId x, std::vector<std::int64_t> shape);

  /// Mean of squared differences over all elements; shapes must match.
  NodeId mse_loss(NodeId pred, NodeId target);

  /// || I - T T^T ||_F^2 for a square T; zero exactly when T is orthogonal.
  NodeId orth_penalty(NodeId t);

  /// Elementwise sum of two same-shape tensors.
  NodeId add(NodeId a, NodeId b);

  /// x * factor.
  NodeId scale(NodeId x, double factor);

  const Tensor& value(NodeId id) const;
  /// Gradient of the last backward() root w.r.t. node id. Zeros if the node
  /// was not reached.
  const Tensor& grad(NodeId id) const;
  bool has_grad(NodeId id) const;

  /// Reverse pass from a scalar root; seeds d(root)/d(root) = seed.
  void backward(NodeId root, double seed = 1.0);

  /// Every param() registration in insertion order, for gradient harvesting.
  const std::vector<std::pair<const Tensor*, NodeId>>& param_nodes() const {
    return param_nodes_;
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kMatmul,
    kAddBias,
    kRelu,
    kMaxOverPoints,
    kReshape,
    kMseLoss,
    kOrthPenalty,
    kAdd,
    kScale,
  };

  struct Node {
    Op op = Op::kLeaf;
    bool needs_grad = false;
    std::array<NodeId, 2> parents{-1, -1};
    Tensor owned;                    // outputs; empty for borrowed leaves
    const Tensor* external = nullptr;  // set for param leaves
    Tensor grad;                     // allocated lazily during backward
    Tensor payload;                  // op-specific forward data kept for backward
    std::vector<std::int32_t> argmax;  // kMaxOverPoints payload
    double factor = 1.0;               // kScale payload

    const Tensor& val() const { return external ? *external : owned; }
  };

  NodeId emplace(Node node);
  const Tensor& val(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].val(); }
  Tensor& ensure_grad(NodeId id);
  bool needs(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  void backward_node(Node& node);

  std::vector<Node> nodes_;
  std::vector<std::pair<const Tensor*, NodeId>> param_nodes_;
};

}  // namespace embryostage::ad
