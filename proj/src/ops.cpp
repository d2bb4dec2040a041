#include "rsen/ops.hpp"

#include <algorithm>
#include <cmath>

namespace rsen::ops {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMajorMap = Eigen::Map<RowMajorMatrix>;
using ConstRowMajorMap = Eigen::Map<const RowMajorMatrix>;

// im2col for "same" zero padding: one row per output pixel, one column per
// (ky, kx, cin) kernel tap.
RowMajorMatrix im2col(const Tensor& input, int k) {
  const int h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const int pad = k / 2;
  RowMajorMatrix cols = RowMajorMatrix::Zero(static_cast<long>(h) * w, static_cast<long>(k) * k * cin);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double* row = cols.data() + (static_cast<long>(y) * w + x) * cols.cols();
      for (int ky = 0; ky < k; ++ky) {
        const int sy = y + ky - pad;
        if (sy < 0 || sy >= h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int sx = x + kx - pad;
          if (sx < 0 || sx >= w) continue;
          const double* src = input.values.data() + (static_cast<long>(sy) * w + sx) * cin;
          std::copy(src, src + cin, row + (static_cast<long>(ky) * k + kx) * cin);
        }
      }
    }
  }
  return cols;
}

// scatter-add of a column gradient back onto the input grid
void col2im_add(const RowMajorMatrix& gcols, int h, int w, int cin, int k, Tensor& grad_in) {
  const int pad = k / 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double* row = gcols.data() + (static_cast<long>(y) * w + x) * gcols.cols();
      for (int ky = 0; ky < k; ++ky) {
        const int sy = y + ky - pad;
        if (sy < 0 || sy >= h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int sx = x + kx - pad;
          if (sx < 0 || sx >= w) continue;
          double* dst = grad_in.values.data() + (static_cast<long>(sy) * w + sx) * cin;
          const double* src = row + (static_cast<long>(ky) * k + kx) * cin;
          for (int c = 0; c < cin; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

void check_conv_shapes(const Tensor& input, const Tensor& kernels, const VectorXd& bias) {
  require_shape(input.rank() == 3, "conv2d_same: input must be H x W x C, got " + shape_str(input.shape));
  require_shape(kernels.rank() == 4, "conv2d_same: kernels must be k x k x Cin x Cout, got " + shape_str(kernels.shape));
  const int k = kernels.dim(0);
  require_shape(kernels.dim(1) == k, "conv2d_same: non-square kernel " + shape_str(kernels.shape));
  require_shape(k == 1 || k == 3, "conv2d_same: kernel size must be 1 or 3, got " + std::to_string(k));
  require_shape(kernels.dim(2) == input.dim(2),
                "conv2d_same: input channels " + std::to_string(input.dim(2)) +
                    " vs kernel channels " + std::to_string(kernels.dim(2)));
  require_shape(static_cast<int>(bias.size()) == kernels.dim(3),
                "conv2d_same: bias length " + std::to_string(bias.size()) +
                    " vs output channels " + std::to_string(kernels.dim(3)));
}

}  // namespace

VectorXd fc_forward(const VectorXd& x, const MatrixXd& W, const VectorXd& b) {
  require_shape(W.cols() == x.size(), "fc_forward: W is " + std::to_string(W.rows()) + "x" +
                                          std::to_string(W.cols()) + " but x has length " +
                                          std::to_string(x.size()));
  require_shape(W.rows() == b.size(), "fc_forward: W has " + std::to_string(W.rows()) +
                                          " rows but b has length " + std::to_string(b.size()));
  return W * x + b;
}

void fc_backward(const VectorXd& x, const MatrixXd& W, const VectorXd& g,
                 VectorXd& dx, MatrixXd& dW, VectorXd& db) {
  dx.noalias() = W.transpose() * g;
  dW.noalias() = g * x.transpose();
  db = g;
}

Tensor relu(const Tensor& x) {
  return Tensor(x.shape, x.values.cwiseMax(0.0));
}

Tensor relu_backward(const Tensor& x, const Tensor& g) {
  Tensor out(x.shape);
  out.values = (x.values.array() > 0.0).select(g.values, 0.0);
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_shape(a.same_shape(b), "add: shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  return Tensor(a.shape, a.values + b.values);
}

VectorXd concat(const VectorXd& a, const VectorXd& b) {
  VectorXd out(a.size() + b.size());
  out << a, b;
  return out;
}

VectorXd flatten(const Tensor& t) { return t.values; }

Tensor conv2d_same(const Tensor& input, const Tensor& kernels, const VectorXd& bias) {
  check_conv_shapes(input, kernels, bias);
  const int h = input.dim(0), w = input.dim(1);
  const int k = kernels.dim(0), cin = kernels.dim(2), cout = kernels.dim(3);
  const RowMajorMatrix cols = im2col(input, k);
  ConstRowMajorMap kmat(kernels.values.data(), static_cast<long>(k) * k * cin, cout);
  Tensor out({h, w, cout});
  RowMajorMap omat(out.values.data(), static_cast<long>(h) * w, cout);
  omat.noalias() = cols * kmat;
  omat.rowwise() += bias.transpose();
  return out;
}

void conv2d_same_backward(const Tensor& input, const Tensor& kernels,
                          const Tensor& grad_out, Tensor& grad_in,
                          Tensor& grad_kernels, VectorXd& grad_bias) {
  const int h = input.dim(0), w = input.dim(1);
  const int k = kernels.dim(0), cin = kernels.dim(2), cout = kernels.dim(3);
  require_shape(grad_out.rank() == 3 && grad_out.dim(0) == h && grad_out.dim(1) == w &&
                    grad_out.dim(2) == cout,
                "conv2d_same_backward: bad grad shape " + shape_str(grad_out.shape));
  ConstRowMajorMap gmat(grad_out.values.data(), static_cast<long>(h) * w, cout);
  ConstRowMajorMap kmat(kernels.values.data(), static_cast<long>(k) * k * cin, cout);

  grad_bias = gmat.colwise().sum().transpose();

  const RowMajorMatrix cols = im2col(input, k);
  grad_kernels = Tensor(kernels.shape);
  RowMajorMap gkmat(grad_kernels.values.data(), static_cast<long>(k) * k * cin, cout);
  gkmat.noalias() = cols.transpose() * gmat;

  grad_in = Tensor(input.shape);
  const RowMajorMatrix gcols = gmat * kmat.transpose();
  col2im_add(gcols, h, w, cin, k, grad_in);
}

Tensor avgpool2x2(const Tensor& input) {
  require_shape(input.rank() == 3, "avgpool2x2: input must be H x W x C");
  const int h = input.dim(0), w = input.dim(1), c = input.dim(2);
  require_shape(h % 2 == 0 && w % 2 == 0,
                "avgpool2x2: spatial dims must be even, got " + shape_str(input.shape));
  Tensor out({h / 2, w / 2, c});
  for (int y = 0; y < h / 2; ++y)
    for (int x = 0; x < w / 2; ++x)
      for (int ch = 0; ch < c; ++ch)
        out.at(y, x, ch) = 0.25 * (input.at(2 * y, 2 * x, ch) + input.at(2 * y, 2 * x + 1, ch) +
                                   input.at(2 * y + 1, 2 * x, ch) + input.at(2 * y + 1, 2 * x + 1, ch));
  return out;
}

Tensor avgpool2x2_backward(const Tensor& grad_out, int in_h, int in_w) {
  const int c = grad_out.dim(2);
  Tensor grad_in({in_h, in_w, c});
  for (int y = 0; y < in_h; ++y)
    for (int x = 0; x < in_w; ++x)
      for (int ch = 0; ch < c; ++ch)
        grad_in.at(y, x, ch) = 0.25 * grad_out.at(y / 2, x / 2, ch);
  return grad_in;
}

VectorXd softmax(const VectorXd& logits) {
  require_shape(logits.size() >= 2, "softmax: need at least 2 logits");
  const VectorXd shifted = logits.array() - logits.maxCoeff();
  VectorXd e = shifted.array().exp();
  return e / e.sum();
}

VectorXd softmax_backward(const VectorXd& probs, const VectorXd& g) {
  const double dot = g.dot(probs);
  return probs.array() * (g.array() - dot);
}

double cross_entropy(const VectorXd& probs, int label) {
  const double p = std::max(probs[label - 1], 1e-30);
  return -std::log(p);
}

}  // namespace rsen::ops
