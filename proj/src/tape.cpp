#include "rsen/tape.hpp"

#include <cmath>

namespace rsen {

using ops::mat_view;

GradientTape::NodeId GradientTape::push(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor{}});
  return static_cast<NodeId>(nodes_.size() - 1);
}

GradientTape::NodeId GradientTape::leaf(Tensor value) { return push(std::move(value)); }

GradientTape::NodeId GradientTape::fc(NodeId x, NodeId W, NodeId b) {
  const Tensor& xv = nodes_[x].value;
  const Tensor& wv = nodes_[W].value;
  const Tensor& bv = nodes_[b].value;
  require_shape(xv.rank() == 1 && bv.rank() == 1, "fc: x and b must be vectors");
  require_shape(wv.rank() == 2 && wv.dim(1) == xv.size() && wv.dim(0) == bv.size(),
                "fc: shape mismatch W" + shape_str(wv.shape) + " x[" + std::to_string(xv.size()) +
                    "] b[" + std::to_string(bv.size()) + "]");
  Tensor out({wv.dim(0)});
  out.values.noalias() = mat_view(wv) * xv.values;
  out.values += bv.values;
  const NodeId y = push(std::move(out));
  ops_.push_back([x, W, b, y](GradientTape& t) {
    const Eigen::VectorXd& g = t.nodes_[y].grad.values;
    t.nodes_[x].grad.values.noalias() += mat_view(t.nodes_[W].value).transpose() * g;
    mat_view(t.nodes_[W].grad).noalias() += g * t.nodes_[x].value.values.transpose();
    t.nodes_[b].grad.values += g;
  });
  return y;
}

GradientTape::NodeId GradientTape::relu(NodeId x) {
  const NodeId y = push(ops::relu(nodes_[x].value));
  ops_.push_back([x, y](GradientTape& t) {
    t.nodes_[x].grad.values +=
        (t.nodes_[x].value.values.array() > 0.0).select(t.nodes_[y].grad.values, 0.0).matrix();
  });
  return y;
}

GradientTape::NodeId GradientTape::add(NodeId a, NodeId b) {
  const NodeId y = push(ops::add(nodes_[a].value, nodes_[b].value));
  ops_.push_back([a, b, y](GradientTape& t) {
    t.nodes_[a].grad.values += t.nodes_[y].grad.values;
    t.nodes_[b].grad.values += t.nodes_[y].grad.values;
  });
  return y;
}

GradientTape::NodeId GradientTape::concat(NodeId a, NodeId b) {
  const Tensor& av = nodes_[a].value;
  const Tensor& bv = nodes_[b].value;
  require_shape(av.rank() == 1 && bv.rank() == 1, "concat: vectors required");
  const NodeId y = push(Tensor::from_vector(ops::concat(av.values, bv.values)));
  const int na = av.size();
  ops_.push_back([a, b, y, na](GradientTape& t) {
    const Eigen::VectorXd& g = t.nodes_[y].grad.values;
    t.nodes_[a].grad.values += g.head(na);
    t.nodes_[b].grad.values += g.tail(g.size() - na);
  });
  return y;
}

GradientTape::NodeId GradientTape::flatten(NodeId x) {
  const NodeId y = push(Tensor::from_vector(nodes_[x].value.values));
  ops_.push_back([x, y](GradientTape& t) {
    t.nodes_[x].grad.values += t.nodes_[y].grad.values;
  });
  return y;
}

GradientTape::NodeId GradientTape::conv2d_same(NodeId input, NodeId kernels, NodeId bias) {
  const NodeId y =
      push(ops::conv2d_same(nodes_[input].value, nodes_[kernels].value, nodes_[bias].value.values));
  ops_.push_back([input, kernels, bias, y](GradientTape& t) {
    Tensor gin, gk;
    Eigen::VectorXd gb;
    ops::conv2d_same_backward(t.nodes_[input].value, t.nodes_[kernels].value, t.nodes_[y].grad,
                              gin, gk, gb);
    t.nodes_[input].grad.values += gin.values;
    t.nodes_[kernels].grad.values += gk.values;
    t.nodes_[bias].grad.values += gb;
  });
  return y;
}

GradientTape::NodeId GradientTape::avgpool2x2(NodeId input) {
  const Tensor& iv = nodes_[input].value;
  const int h = iv.dim(0), w = iv.dim(1);
  const NodeId y = push(ops::avgpool2x2(iv));
  ops_.push_back([input, y, h, w](GradientTape& t) {
    t.nodes_[input].grad.values += ops::avgpool2x2_backward(t.nodes_[y].grad, h, w).values;
  });
  return y;
}

GradientTape::NodeId GradientTape::softmax(NodeId logits) {
  const NodeId y = push(Tensor::from_vector(ops::softmax(nodes_[logits].value.values)));
  ops_.push_back([logits, y](GradientTape& t) {
    t.nodes_[logits].grad.values +=
        ops::softmax_backward(t.nodes_[y].value.values, t.nodes_[y].grad.values);
  });
  return y;
}

GradientTape::NodeId GradientTape::softmax_cross_entropy(NodeId logits, int label,
                                                         Eigen::VectorXd* probs_out) {
  Eigen::VectorXd probs = ops::softmax(nodes_[logits].value.values);
  if (probs_out) *probs_out = probs;
  const double loss = ops::cross_entropy(probs, label);
  const NodeId y = push(Tensor({1}, Eigen::VectorXd::Constant(1, loss)));
  ops_.push_back([logits, y, label, probs = std::move(probs)](GradientTape& t) {
    const double seed = t.nodes_[y].grad.values[0];
    Eigen::VectorXd g = probs;
    g[label - 1] -= 1.0;
    t.nodes_[logits].grad.values += seed * g;
  });
  return y;
}

void GradientTape::backward(NodeId output, const Tensor& seed) {
  if (consumed_) throw UsageError("GradientTape::backward called twice on the same tape");
  consumed_ = true;
  require_shape(seed.shape == nodes_[output].value.shape,
                "backward: seed shape " + shape_str(seed.shape) + " does not match output " +
                    shape_str(nodes_[output].value.shape));
  for (auto& node : nodes_) node.grad = Tensor(node.value.shape);
  nodes_[output].grad = seed;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)(*this);
}

}  // namespace rsen
