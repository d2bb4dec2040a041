#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rsen/tape.hpp"
#include "rsen/tensor.hpp"

namespace rsen {

// Architecture sizes derived from the input dimensions.
struct NetDims {
  int n;  // spectral bands
  int p;  // principal components in the patch
  int w;  // patch side, multiple of 4
  int k;  // classes

  static constexpr int kSpectralWidth = 64;
  static constexpr int kChannels = 64;
  static constexpr int kFc1Width = 128;

  int spatial_features() const { return (w / 4) * (w / 4) * kChannels; }
  int fusion_size() const { return kSpectralWidth + spatial_features(); }
  bool operator==(const NetDims&) const = default;
};

// The full weight set of one network instance. Student and teacher hold
// structurally identical copies; the same struct also serves as a container
// for gradients and optimizer moments.
struct BaseNetParams {
  NetDims dims{};
  Tensor w_spe, b_spe;
  Tensor conv1_k, conv1_b;
  Tensor conv2_k, conv2_b;
  Tensor conv3_k, conv3_b;
  Tensor w_fc1, b_fc1;
  Tensor w_cls, b_cls;

  static BaseNetParams zeros(NetDims dims);
  bool all_finite() const;
};

struct ParamRef {
  const char* name;
  Tensor* tensor;
};
// fixed order, also the checkpoint order
std::vector<ParamRef> param_refs(BaseNetParams& p);
std::vector<ParamRef> param_refs(const BaseNetParams& p);

// He-initialized weights, zero biases, deterministic in the seed.
BaseNetParams init_params(std::uint64_t seed, NetDims dims);

// One forward pass with its gradient tape and every intermediate activation.
struct ForwardTrace {
  NetDims dims{};
  GradientTape tape;
  // parameter leaves, in param_refs order
  std::vector<GradientTape::NodeId> param_nodes;
  GradientTape::NodeId spectral_in, patch_in;
  GradientTape::NodeId h_spe, h_conv1, h_conv2, h_pool1, h_conv3, h_pool2;
  GradientTape::NodeId h_spa, h_fusion, fc1_out, logits, probs_node;
  GradientTape::NodeId loss_node = -1;
  Eigen::VectorXd probs;
};

ForwardTrace forward(const BaseNetParams& params, const Eigen::VectorXd& spectral,
                     const Tensor& patch);

// inference-only forward, no tape, no parameter copies
Eigen::VectorXd forward_probs(const BaseNetParams& params, const Eigen::VectorXd& spectral,
                              const Tensor& patch);

// -log p[label]; label is 1-based
double supervised_loss(const Eigen::VectorXd& probs, int label);

// Attach the fused cross-entropy head, run reverse accumulation seeded with
// `seed` on the loss, and return parameter gradients. Consumes the tape.
BaseNetParams param_gradients_supervised(ForwardTrace& trace, int label, double seed = 1.0);

// Reverse accumulation seeded with dL/dprobs on the softmax output.
BaseNetParams param_gradients_from_probs(ForwardTrace& trace, const Eigen::VectorXd& dprobs);

// grads += scale * tape leaf gradients (after a backward call)
void accumulate_gradients(BaseNetParams& grads, const ForwardTrace& trace, double scale);

// a += scale * b, elementwise over all parameter tensors
void axpy_params(BaseNetParams& a, const BaseNetParams& b, double scale);

// checkpoint: magic "RSEN", version, dims, then student and teacher tensors
// in param_refs order (shape header + little-endian float64 payload)
void save_checkpoint(const std::string& path, const BaseNetParams& student,
                     const BaseNetParams& teacher);
struct Checkpoint {
  BaseNetParams student;
  BaseNetParams teacher;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace rsen
