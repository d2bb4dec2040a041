#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rsen/basenet.hpp"

namespace rsen {

struct GradCheckLayer {
  std::string name;
  double max_rel_err = 0.0;
  int entries_checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckLayer> layers;
  double max_rel_err = 0.0;
};

// Full-model check of reverse-mode gradients against central finite
// differences (h = 1e-5) on the supervised loss. Checks a deterministic
// random subset of entries per parameter tensor. `corrupt` perturbs the
// analytic gradients, as a negative control.
GradCheckReport gradcheck_full_model(std::uint64_t seed, NetDims dims,
                                     int entries_per_tensor = 30, bool corrupt = false);

}  // namespace rsen
