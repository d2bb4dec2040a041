#pragma once

#include <stdexcept>
#include <string>

namespace rsen {

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParamError : std::invalid_argument {
  explicit ParamError(const std::string& msg) : std::invalid_argument(msg) {}
};

struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

struct UsageError : std::logic_error {
  explicit UsageError(const std::string& msg) : std::logic_error(msg) {}
};

// Non-finite loss or activation during training; carries the iteration context.
struct NumericalError : std::runtime_error {
  long iteration;
  explicit NumericalError(const std::string& msg, long iter = -1)
      : std::runtime_error(msg), iteration(iter) {}
};

}  // namespace rsen
