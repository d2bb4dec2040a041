#include "rsen/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "rsen/rng.hpp"

namespace rsen {

namespace {

double loss_at(const BaseNetParams& params, const Eigen::VectorXd& spectral, const Tensor& patch,
               int label) {
  return supervised_loss(forward_probs(params, spectral, patch), label);
}

}  // namespace

GradCheckReport gradcheck_full_model(std::uint64_t seed, NetDims dims, int entries_per_tensor,
                                     bool corrupt) {
  BaseNetParams params = init_params(seed, dims);

  RngStream input_stream(stream_key(seed, 0x47434b49ULL));  // inputs
  Eigen::VectorXd spectral(dims.n);
  for (int i = 0; i < dims.n; ++i) spectral[i] = input_stream.uniform();
  Tensor patch({dims.w, dims.w, dims.p});
  for (int i = 0; i < patch.size(); ++i) patch[i] = input_stream.normal() * 0.5;
  const int label = 1 + static_cast<int>(input_stream.below(dims.k));

  ForwardTrace trace = forward(params, spectral, patch);
  BaseNetParams analytic = param_gradients_supervised(trace, label);
  if (corrupt) {
    // negative control: visibly wrong gradients
    for (auto& ref : param_refs(analytic)) ref.tensor->values *= 1.05;
  }

  constexpr double h = 1e-5;
  GradCheckReport report;
  auto refs = param_refs(params);
  auto grefs = param_refs(analytic);
  for (std::size_t t = 0; t < refs.size(); ++t) {
    Tensor& tensor = *refs[t].tensor;
    GradCheckLayer layer;
    layer.name = refs[t].name;
    RngStream pick(stream_key(seed, 0x47434b50ULL, t));  // entry picks
    const int n_check = std::min(entries_per_tensor, tensor.size());
    for (int s = 0; s < n_check; ++s) {
      const int idx = static_cast<int>(pick.below(static_cast<std::uint64_t>(tensor.size())));
      const double saved = tensor[idx];
      tensor[idx] = saved + h;
      const double up = loss_at(params, spectral, patch, label);
      tensor[idx] = saved - h;
      const double down = loss_at(params, spectral, patch, label);
      tensor[idx] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double g = (*grefs[t].tensor)[idx];
      const double denom = std::max({std::abs(fd), std::abs(g), 1e-8});
      layer.max_rel_err = std::max(layer.max_rel_err, std::abs(fd - g) / denom);
      ++layer.entries_checked;
    }
    report.max_rel_err = std::max(report.max_rel_err, layer.max_rel_err);
    report.layers.push_back(std::move(layer));
  }
  return report;
}

}  // namespace rsen
