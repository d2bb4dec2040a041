#include "rsen/tensor.hpp"

#include <sstream>

namespace rsen {

long long shape_count(const std::vector<int>& shape) {
  long long n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void require_shape(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

Tensor::Tensor(std::vector<int> s)
    : shape(std::move(s)), values(Eigen::VectorXd::Zero(shape_count(shape))) {}

Tensor::Tensor(std::vector<int> s, Eigen::VectorXd v) : shape(std::move(s)), values(std::move(v)) {
  if (shape_count(shape) != values.size())
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
}

Tensor Tensor::from_vector(Eigen::VectorXd v) {
  const int n = static_cast<int>(v.size());
  return Tensor({n}, std::move(v));
}

}  // namespace rsen
