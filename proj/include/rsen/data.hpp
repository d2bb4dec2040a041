#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rsen/rng.hpp"
#include "rsen/tensor.hpp"

namespace rsen {

// 3-D hyperspectral raster, pixel-major with the band index fastest
// (matches the on-disk HSC1 layout). Stored 32-bit, promoted on use.
struct HsiCube {
  int rows = 0, cols = 0, bands = 0;
  std::vector<float> values;

  float at(int r, int c, int b) const {
    return values[(static_cast<std::size_t>(r) * cols + c) * bands + b];
  }
  float& at(int r, int c, int b) {
    return values[(static_cast<std::size_t>(r) * cols + c) * bands + b];
  }
  Eigen::VectorXd spectrum(int r, int c) const;
};

struct LabelMap {
  int rows = 0, cols = 0;
  std::vector<int> labels;  // 0 = background, 1..k = classes

  int at(int r, int c) const { return labels[static_cast<std::size_t>(r) * cols + c]; }
  int& at(int r, int c) { return labels[static_cast<std::size_t>(r) * cols + c]; }
  int max_label() const;
};

// PCA scores plus the loading matrix and band means used to produce them.
struct ReducedCube {
  int rows = 0, cols = 0, p = 0;
  std::vector<double> scores;                // rows x cols x p, pixel-major
  Eigen::MatrixXd loadings;                  // bands x p, orthonormal columns
  Eigen::VectorXd band_means;                // length bands
  Eigen::VectorXd explained_variance;        // length p, non-increasing

  double at(int r, int c, int j) const {
    return scores[(static_cast<std::size_t>(r) * cols + c) * p + j];
  }
};

// one pixel's training record
struct Sample {
  int row = 0, col = 0;
  Eigen::VectorXd spectral;
  Tensor patch;               // w x w x p
  std::optional<int> label;   // 1-based class id
};

struct SplitSpec {
  std::vector<std::vector<std::pair<int, int>>> labeled_per_class;  // [class-1] -> pixels
  std::vector<std::pair<int, int>> test;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  std::vector<std::pair<int, int>> all_labeled() const;
};

// ---- file io (HSC1 cube + plain-text label map) ----------------------------
HsiCube load_cube(const std::string& path);
void save_cube(const HsiCube& cube, const std::string& path);
LabelMap load_labels(const std::string& path);
void save_labels(const LabelMap& labels, const std::string& path);

// ---- preprocessing ---------------------------------------------------------
// per-band min-max to [0, 1]; constant bands map to zero
HsiCube normalize(const HsiCube& cube);

ReducedCube pca_reduce(const HsiCube& cube, int p);

// w x w patch of PCA scores with the pixel at (w/2, w/2); borders mirrored
Sample extract_sample(const HsiCube& normalized, const ReducedCube& reduced, int r, int c, int w);

// mirror-fold an index into [0, n)
int mirror_index(int i, int n);

// ---- splits ----------------------------------------------------------------
SplitSpec split_dataset(const LabelMap& labels, int n_per_class, std::uint64_t seed);

struct UnlabeledPool {
  std::vector<std::pair<int, int>> indices;
  std::vector<std::string> warnings;
};
UnlabeledPool sample_unlabeled(const LabelMap& labels, int n_u, std::uint64_t seed);

// ---- augmentation ----------------------------------------------------------
// i.i.d. Gaussian noise on the spectral vector and the patch; label untouched
Sample augment(const Sample& sample, double noise_std, RngStream& stream);

// ---- synthetic scenes ------------------------------------------------------
struct SyntheticScene {
  HsiCube cube;
  LabelMap labels;
  Eigen::MatrixXd signatures;  // k x bands, the true class means
};
SyntheticScene generate_synthetic(int rows, int cols, int bands, int k, std::uint64_t seed,
                                  double noise_std = 0.1);

}  // namespace rsen
