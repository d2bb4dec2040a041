#pragma once

#include <Eigen/Dense>
#include <initializer_list>
#include <string>
#include <vector>

#include "rsen/errors.hpp"

namespace rsen {

// Dense multi-dimensional array, row-major, 64-bit floats. Vectors are
// rank-1 tensors; image-like data is H x W x C with the channel fastest.
struct Tensor {
  std::vector<int> shape;
  Eigen::VectorXd values;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);
  Tensor(std::vector<int> s, Eigen::VectorXd v);

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor from_vector(Eigen::VectorXd v);

  int size() const { return static_cast<int>(values.size()); }
  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
  int rank() const { return static_cast<int>(shape.size()); }

  double& operator[](int i) { return values[i]; }
  double operator[](int i) const { return values[i]; }

  // rank-3 accessors (H x W x C)
  double& at(int h, int w, int c) {
    return values[(h * shape[1] + w) * shape[2] + c];
  }
  double at(int h, int w, int c) const {
    return values[(h * shape[1] + w) * shape[2] + c];
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const { return values.allFinite(); }
};

long long shape_count(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);
void require_shape(bool cond, const std::string& msg);

}  // namespace rsen
