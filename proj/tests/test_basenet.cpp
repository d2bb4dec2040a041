#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "rsen/basenet.hpp"
#include "rsen/errors.hpp"
#include "rsen/gradcheck.hpp"
#include "rsen/rng.hpp"
#include "rsen/train.hpp"

using namespace rsen;
using Eigen::VectorXd;

namespace {

std::pair<VectorXd, Tensor> random_input(NetDims d, std::uint64_t seed) {
  RngStream stream(seed);
  VectorXd spectral(d.n);
  for (int i = 0; i < d.n; ++i) spectral[i] = stream.uniform();
  Tensor patch({d.w, d.w, d.p});
  for (int i = 0; i < patch.size(); ++i) patch[i] = stream.uniform();
  return {spectral, patch};
}

}  // namespace

TEST_CASE("init_params: determinism and difference across seeds") {
  const NetDims dims{8, 2, 8, 3};
  const BaseNetParams a = init_params(5, dims);
  const BaseNetParams b = init_params(5, dims);
  const BaseNetParams c = init_params(6, dims);
  const auto ra = param_refs(a), rb = param_refs(b), rc = param_refs(c);
  for (std::size_t i = 0; i < ra.size(); ++i) {
    CHECK(ra[i].tensor->values == rb[i].tensor->values);
    if (!ra[i].tensor->values.isZero(0))  // weights differ; biases are all zero
      CHECK(ra[i].tensor->values != rc[i].tensor->values);
  }
}

TEST_CASE("init_params: architecture shapes for n=103, p=5, w=16, k=9") {
  const NetDims dims{103, 5, 16, 9};
  const BaseNetParams params = init_params(0, dims);
  CHECK(params.w_spe.shape == std::vector<int>{64, 103});
  CHECK(params.b_spe.shape == std::vector<int>{64});
  CHECK(params.conv1_k.shape == std::vector<int>{1, 1, 5, 64});
  CHECK(params.conv1_b.shape == std::vector<int>{64});
  CHECK(params.conv2_k.shape == std::vector<int>{3, 3, 64, 64});
  CHECK(params.conv2_b.shape == std::vector<int>{64});
  CHECK(params.conv3_k.shape == std::vector<int>{3, 3, 64, 64});
  CHECK(params.conv3_b.shape == std::vector<int>{64});
  // two 2x2 pools: 16 -> 8 -> 4, so 4*4*64 = 1024 spatial + 64 spectral
  CHECK(params.w_fc1.shape == std::vector<int>{128, 1088});
  CHECK(params.b_fc1.shape == std::vector<int>{128});
  CHECK(params.w_cls.shape == std::vector<int>{9, 128});
  CHECK(params.b_cls.shape == std::vector<int>{9});
  // biases start at zero
  CHECK(params.b_spe.values.isZero(0));
  CHECK(params.b_cls.values.isZero(0));
}

TEST_CASE("init_params: weight std near sqrt(2/fan_in) for the 128x1088 layer") {
  const NetDims dims{103, 5, 16, 9};
  const BaseNetParams params = init_params(1, dims);
  const auto& w = params.w_fc1.values;
  const double mean = w.mean();
  const double stddev = std::sqrt((w.array() - mean).square().sum() / (w.size() - 1));
  const double expected = std::sqrt(2.0 / 1088.0);
  CHECK(std::abs(stddev - expected) <= 0.1 * expected);
}

TEST_CASE("init_params rejects invalid dims") {
  CHECK_THROWS_AS(init_params(0, NetDims{0, 2, 8, 3}), ParamError);
  CHECK_THROWS_AS(init_params(0, NetDims{8, 2, 6, 3}), ParamError);  // w not multiple of 4
  CHECK_THROWS_AS(init_params(0, NetDims{8, 2, 8, 0}), ParamError);
}

TEST_CASE("forward: zero weights give the uniform distribution") {
  const NetDims dims{6, 2, 8, 4};
  const BaseNetParams zero = BaseNetParams::zeros(dims);
  const auto [spectral, patch] = random_input(dims, 3);
  const VectorXd probs = forward_probs(zero, spectral, patch);
  for (int j = 0; j < 4; ++j) CHECK(probs[j] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("forward: probabilities are a distribution; trace matches fast path") {
  const NetDims dims{6, 2, 8, 4};
  const BaseNetParams params = init_params(9, dims);
  const auto [spectral, patch] = random_input(dims, 4);

  ForwardTrace trace = forward(params, spectral, patch);
  CHECK(std::abs(trace.probs.sum() - 1.0) <= 1e-12);
  for (int j = 0; j < 4; ++j) {
    CHECK(trace.probs[j] > 0.0);
    CHECK(trace.probs[j] < 1.0);
  }
  const VectorXd fast = forward_probs(params, spectral, patch);
  CHECK(fast == trace.probs);  // bit-identical paths

  // determinism
  CHECK(forward_probs(params, spectral, patch) == fast);
}

TEST_CASE("forward: shape mismatches rejected") {
  const NetDims dims{6, 2, 8, 4};
  const BaseNetParams params = init_params(0, dims);
  const auto [spectral, patch] = random_input(dims, 0);
  CHECK_THROWS_AS(forward_probs(params, VectorXd::Zero(5), patch), ShapeError);
  CHECK_THROWS_AS(forward_probs(params, spectral, Tensor({8, 8, 3})), ShapeError);
}

TEST_CASE("permuting classifier rows permutes the output probabilities") {
  const NetDims dims{6, 2, 8, 4};
  BaseNetParams params = init_params(11, dims);
  const auto [spectral, patch] = random_input(dims, 11);
  const VectorXd base = forward_probs(params, spectral, patch);

  const int perm[4] = {2, 0, 3, 1};  // row i of the permuted net = row perm[i]
  BaseNetParams permuted = params;
  for (int i = 0; i < 4; ++i) {
    permuted.b_cls[i] = params.b_cls[perm[i]];
    for (int j = 0; j < 128; ++j)
      permuted.w_cls.values[i * 128 + j] = params.w_cls.values[perm[i] * 128 + j];
  }
  const VectorXd out = forward_probs(permuted, spectral, patch);
  for (int i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(base[perm[i]]).epsilon(1e-14));
}

TEST_CASE("supervised_loss: definition, uniform case, non-negativity") {
  VectorXd onehot = VectorXd::Zero(3);
  onehot[1] = 1.0;
  CHECK(supervised_loss(onehot, 2) == 0.0);

  const VectorXd uniform = VectorXd::Constant(10, 0.1);
  CHECK(supervised_loss(uniform, 7) == doctest::Approx(std::log(10.0)).epsilon(1e-12));

  RngStream stream(2);
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd raw(4);
    for (int i = 0; i < 4; ++i) raw[i] = stream.uniform();
    const VectorXd probs = raw / raw.sum();
    CHECK(supervised_loss(probs, 1 + static_cast<int>(stream.below(4))) >= 0.0);
  }

  // zero probability is clamped, not -inf
  CHECK(std::isfinite(supervised_loss(onehot, 1)));
}

TEST_CASE("gradient of b_cls equals probs minus the one-hot label") {
  const NetDims dims{6, 2, 8, 4};
  const BaseNetParams params = init_params(21, dims);
  const auto [spectral, patch] = random_input(dims, 21);
  const int label = 3;

  ForwardTrace trace = forward(params, spectral, patch);
  const VectorXd probs = trace.probs;
  const BaseNetParams grads = param_gradients_supervised(trace, label);
  for (int j = 0; j < 4; ++j) {
    const double expected = probs[j] - (j == label - 1 ? 1.0 : 0.0);
    CHECK(grads.b_cls[j] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("zero loss seed gives all-zero gradients") {
  const NetDims dims{6, 2, 8, 4};
  const BaseNetParams params = init_params(23, dims);
  const auto [spectral, patch] = random_input(dims, 23);
  ForwardTrace trace = forward(params, spectral, patch);
  const BaseNetParams grads = param_gradients_supervised(trace, 1, 0.0);
  for (const auto& ref : param_refs(grads)) CHECK(ref.tensor->values.isZero(0));
}

TEST_CASE("full-model gradients match finite differences on the reduced net") {
  const GradCheckReport report = gradcheck_full_model(0, NetDims{8, 2, 8, 3}, 10);
  CHECK(report.max_rel_err <= 1e-4);
  CHECK(!report.layers.empty());
  for (const auto& layer : report.layers) CHECK(layer.entries_checked > 0);
}

TEST_CASE("corrupted gradients fail the finite-difference check") {
  const GradCheckReport report = gradcheck_full_model(0, NetDims{8, 2, 8, 3}, 10, true);
  CHECK(report.max_rel_err > 1e-4);
}

TEST_CASE("doubling w changes only the spatial flatten and fc1 input width") {
  const NetDims d8{10, 3, 8, 4};
  const NetDims d16{10, 3, 16, 4};
  CHECK(d16.spatial_features() == 4 * d8.spatial_features());
  const BaseNetParams p8 = init_params(0, d8);
  const BaseNetParams p16 = init_params(0, d16);
  CHECK(p16.w_fc1.dim(1) == 64 + d16.spatial_features());
  CHECK(p8.w_fc1.dim(1) == 64 + d8.spatial_features());
  CHECK(p8.w_spe.shape == p16.w_spe.shape);
  CHECK(p8.conv1_k.shape == p16.conv1_k.shape);
  CHECK(p8.conv2_k.shape == p16.conv2_k.shape);
  CHECK(p8.conv3_k.shape == p16.conv3_k.shape);
  CHECK(p8.w_cls.shape == p16.w_cls.shape);
  CHECK(p8.w_fc1.dim(0) == p16.w_fc1.dim(0));
}

TEST_CASE("trainability: one sample driven above 0.99 true-class probability") {
  const NetDims dims{6, 2, 8, 3};
  BaseNetParams params = init_params(31, dims);
  const auto [spectral, patch] = random_input(dims, 31);
  const int label = 2;
  AdamState adam{BaseNetParams::zeros(dims), BaseNetParams::zeros(dims), 0};
  double prob = 0.0;
  for (int step = 0; step < 500 && prob <= 0.99; ++step) {
    ForwardTrace trace = forward(params, spectral, patch);
    prob = trace.probs[label - 1];
    const BaseNetParams grads = param_gradients_supervised(trace, label);
    adam_step(params, grads, adam, 1e-2);
  }
  CHECK(prob > 0.99);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const NetDims dims{6, 2, 8, 3};
  const BaseNetParams student = init_params(41, dims);
  const BaseNetParams teacher = init_params(42, dims);
  const std::string path =
      (std::filesystem::temp_directory_path() / "ck.rsen").string();
  save_checkpoint(path, student, teacher);
  const Checkpoint back = load_checkpoint(path);
  const auto rs = param_refs(student), rt = param_refs(teacher);
  const auto bs = param_refs(back.student), bt = param_refs(back.teacher);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    CHECK(bs[i].tensor->values == rs[i].tensor->values);
    CHECK(bt[i].tensor->values == rt[i].tensor->values);
  }
  CHECK(back.student.dims == dims);

  // corrupting the magic is rejected
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  std::remove(path.c_str());
}
