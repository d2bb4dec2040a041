#pragma once

#include <functional>
#include <vector>

#include "rsen/ops.hpp"
#include "rsen/tensor.hpp"

namespace rsen {

// Reverse-mode gradient tape over the layer primitives in ops.hpp. Each
// recorded primitive pushes a closure; backward() replays them in exact
// reverse order. Single-use: a tape cannot be replayed twice.
class GradientTape {
 public:
  using NodeId = int;

  GradientTape() = default;
  GradientTape(const GradientTape&) = delete;
  GradientTape& operator=(const GradientTape&) = delete;
  GradientTape(GradientTape&&) = default;
  GradientTape& operator=(GradientTape&&) = default;

  // leaf node (input or parameter)
  NodeId leaf(Tensor value);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  const Tensor& grad(NodeId id) const { return nodes_[id].grad; }

  NodeId fc(NodeId x, NodeId W, NodeId b);  // W is a rank-2 leaf [rows, cols]
  NodeId relu(NodeId x);
  NodeId add(NodeId a, NodeId b);
  NodeId concat(NodeId a, NodeId b);
  NodeId flatten(NodeId x);
  NodeId conv2d_same(NodeId input, NodeId kernels, NodeId bias);
  NodeId avgpool2x2(NodeId input);
  NodeId softmax(NodeId logits);
  // fused softmax + cross-entropy head; label is 1-based; value is a scalar
  NodeId softmax_cross_entropy(NodeId logits, int label, Eigen::VectorXd* probs_out = nullptr);

  // Reverse accumulation from `output` seeded with `seed`. Gradients of all
  // leaves become available through grad(). Throws UsageError on reuse.
  void backward(NodeId output, const Tensor& seed);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
  };
  NodeId push(Tensor value);

  std::vector<Node> nodes_;
  std::vector<std::function<void(GradientTape&)>> ops_;
  bool consumed_ = false;
};

}  // namespace rsen
