#pragma once

#include <Eigen/Dense>

#include "rsen/tensor.hpp"

namespace rsen::ops {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// view a rank-2 tensor as a matrix without copying
inline Eigen::Map<const RowMajorMatrix> mat_view(const Tensor& w) {
  require_shape(w.rank() == 2, "mat_view: rank-2 tensor required, got " + shape_str(w.shape));
  return {w.values.data(), w.dim(0), w.dim(1)};
}
inline Eigen::Map<RowMajorMatrix> mat_view(Tensor& w) {
  require_shape(w.rank() == 2, "mat_view: rank-2 tensor required, got " + shape_str(w.shape));
  return {w.values.data(), w.dim(0), w.dim(1)};
}

// ---- fully connected -------------------------------------------------------
// y = W x + b (activation is a separate op)
VectorXd fc_forward(const VectorXd& x, const MatrixXd& W, const VectorXd& b);
// given upstream gradient g on y: dx = W^T g, dW = g x^T, db = g
void fc_backward(const VectorXd& x, const MatrixXd& W, const VectorXd& g,
                 VectorXd& dx, MatrixXd& dW, VectorXd& db);

// ---- elementwise -----------------------------------------------------------
Tensor relu(const Tensor& x);
// subgradient at 0 is 0
Tensor relu_backward(const Tensor& x, const Tensor& g);
Tensor add(const Tensor& a, const Tensor& b);

// ---- shape -----------------------------------------------------------------
VectorXd concat(const VectorXd& a, const VectorXd& b);
VectorXd flatten(const Tensor& t);

// ---- convolution -----------------------------------------------------------
// "same" cross-correlation with zero padding. input H x W x Cin,
// kernels k x k x Cin x Cout, k in {1, 3}; output H x W x Cout.
Tensor conv2d_same(const Tensor& input, const Tensor& kernels, const VectorXd& bias);
void conv2d_same_backward(const Tensor& input, const Tensor& kernels,
                          const Tensor& grad_out, Tensor& grad_in,
                          Tensor& grad_kernels, VectorXd& grad_bias);

// ---- pooling ---------------------------------------------------------------
// 2x2 non-overlapping mean; H and W must be even.
Tensor avgpool2x2(const Tensor& input);
// gradient: each window cell receives grad/4
Tensor avgpool2x2_backward(const Tensor& grad_out, int in_h, int in_w);

// ---- softmax ---------------------------------------------------------------
// max-subtracted for stability
VectorXd softmax(const VectorXd& logits);
// dx = p .* (g - (g . p))
VectorXd softmax_backward(const VectorXd& probs, const VectorXd& g);

// cross-entropy on a softmax distribution; label is 1-based
double cross_entropy(const VectorXd& probs, int label);

}  // namespace rsen::ops
