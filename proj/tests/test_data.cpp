#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "rsen/data.hpp"
#include "rsen/errors.hpp"

using namespace rsen;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("cube round trip: 1x1x1 value 7.0") {
  HsiCube cube;
  cube.rows = cube.cols = cube.bands = 1;
  cube.values = {7.0f};
  const std::string path = tmp_path("rt.hsc1");
  save_cube(cube, path);
  const HsiCube back = load_cube(path);
  CHECK(back.rows == 1);
  CHECK(back.cols == 1);
  CHECK(back.bands == 1);
  CHECK(back.values[0] == 7.0f);
  std::remove(path.c_str());
}

TEST_CASE("cube round trip is bit-exact on random data") {
  const SyntheticScene scene = generate_synthetic(10, 10, 6, 2, 3);
  const std::string path = tmp_path("rt2.hsc1");
  save_cube(scene.cube, path);
  const HsiCube back = load_cube(path);
  CHECK(back.values == scene.cube.values);
  // saving again produces identical bytes
  const std::string first = read_file(path);
  save_cube(back, path);
  CHECK(read_file(path) == first);
  std::remove(path.c_str());
}

TEST_CASE("cube format errors") {
  const std::string path = tmp_path("bad.hsc1");

  SUBCASE("bad magic") {
    write_file(path, std::string("XXXX") + std::string(12, '\0'));
    CHECK_THROWS_AS(load_cube(path), FormatError);
  }
  SUBCASE("truncated payload") {
    HsiCube cube;
    cube.rows = cube.cols = 2;
    cube.bands = 3;
    cube.values.assign(12, 1.0f);
    save_cube(cube, path);
    const std::string bytes = read_file(path);
    write_file(path, bytes.substr(0, bytes.size() - 6));
    try {
      load_cube(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    }
  }
  SUBCASE("header claims 2x2x3 but payload has 11 floats") {
    HsiCube cube;
    cube.rows = cube.cols = 2;
    cube.bands = 3;
    cube.values.assign(12, 1.0f);
    save_cube(cube, path);
    const std::string bytes = read_file(path);
    write_file(path, bytes.substr(0, bytes.size() - 4));
    CHECK_THROWS_AS(load_cube(path), FormatError);
  }
  SUBCASE("trailing data rejected") {
    HsiCube cube;
    cube.rows = cube.cols = cube.bands = 1;
    cube.values = {1.0f};
    save_cube(cube, path);
    write_file(path, read_file(path) + "z");
    CHECK_THROWS_AS(load_cube(path), FormatError);
  }
  SUBCASE("non-finite value rejected") {
    HsiCube cube;
    cube.rows = cube.cols = cube.bands = 1;
    cube.values = {std::numeric_limits<float>::quiet_NaN()};
    save_cube(cube, path);
    CHECK_THROWS_AS(load_cube(path), FormatError);
  }
  std::remove(path.c_str());
}

TEST_CASE("label file round trip and errors") {
  LabelMap lm;
  lm.rows = 2;
  lm.cols = 3;
  lm.labels = {0, 1, 2, 2, 1, 0};
  const std::string path = tmp_path("rt.labels");
  save_labels(lm, path);
  const LabelMap back = load_labels(path);
  CHECK(back.rows == 2);
  CHECK(back.cols == 3);
  CHECK(back.labels == lm.labels);
  CHECK(back.max_label() == 2);

  write_file(path, "2 3\n0 1 2\n2 1\n");
  CHECK_THROWS_AS(load_labels(path), FormatError);
  write_file(path, "2 3\n0 1 2\n2 -1 0\n");
  CHECK_THROWS_AS(load_labels(path), FormatError);
  std::remove(path.c_str());
}

TEST_CASE("normalize: affine definition, constant band, idempotence") {
  HsiCube cube;
  cube.rows = 3;
  cube.cols = 1;
  cube.bands = 2;
  // band 0: [2, 4, 6]; band 1 constant
  cube.values = {2.0f, 9.0f, 4.0f, 9.0f, 6.0f, 9.0f};
  const HsiCube norm = normalize(cube);
  CHECK(norm.at(0, 0, 0) == 0.0f);
  CHECK(norm.at(1, 0, 0) == 0.5f);
  CHECK(norm.at(2, 0, 0) == 1.0f);
  for (int r = 0; r < 3; ++r) CHECK(norm.at(r, 0, 1) == 0.0f);
  const HsiCube twice = normalize(norm);
  CHECK(twice.values == norm.values);
}

TEST_CASE("pca: rank-1 data puts all variance on the first component") {
  HsiCube cube;
  cube.rows = 1;
  cube.cols = 5;
  cube.bands = 3;
  cube.values.resize(15);
  const double dir[3] = {1.0, -2.0, 0.5};
  for (int px = 0; px < 5; ++px)
    for (int b = 0; b < 3; ++b)
      cube.values[px * 3 + b] = static_cast<float>(px * dir[b]);
  const ReducedCube red = pca_reduce(cube, 3);
  const double total = red.explained_variance.sum();
  CHECK(red.explained_variance[0] / total == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(red.explained_variance[1] <= 1e-10);
}

TEST_CASE("pca: two orthogonal directions with variances 4:1 explain 0.8/0.2") {
  // band-0 values {2,-2,0,0}, band-1 values {0,0,1,-1}: the 2x2 population
  // covariance is diag(2, 0.5), so the eigen-oracle gives ratios 0.8 and 0.2
  HsiCube cube;
  cube.rows = 1;
  cube.cols = 4;
  cube.bands = 2;
  cube.values = {2.0f, 0.0f, -2.0f, 0.0f, 0.0f, 1.0f, 0.0f, -1.0f};
  const ReducedCube red = pca_reduce(cube, 2);
  CHECK(red.explained_variance[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(red.explained_variance[1] == doctest::Approx(0.5).epsilon(1e-12));
  const double total = red.explained_variance.sum();
  CHECK(red.explained_variance[0] / total == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(red.explained_variance[1] / total == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("pca: p = bands reconstructs the centered data") {
  const SyntheticScene scene = generate_synthetic(10, 10, 6, 2, 17);
  const ReducedCube red = pca_reduce(scene.cube, 6);

  // orthonormal loadings, non-increasing eigenvalues
  const Eigen::MatrixXd gram = red.loadings.transpose() * red.loadings;
  CHECK((gram - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-10);
  for (int j = 1; j < 6; ++j)
    CHECK(red.explained_variance[j] <= red.explained_variance[j - 1] + 1e-12);

  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c) {
      Eigen::VectorXd score(6);
      for (int j = 0; j < 6; ++j) score[j] = red.at(r, c, j);
      const Eigen::VectorXd rebuilt = red.loadings * score + red.band_means;
      const Eigen::VectorXd original = scene.cube.spectrum(r, c);
      CHECK((rebuilt - original).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("pca: p out of range") {
  const SyntheticScene scene = generate_synthetic(10, 10, 4, 2, 1);
  CHECK_THROWS_AS(pca_reduce(scene.cube, 0), ParamError);
  CHECK_THROWS_AS(pca_reduce(scene.cube, 5), ParamError);
}

TEST_CASE("mirror_index against a brute-force fold oracle") {
  // half-sample fold: ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
  auto oracle = [](int i, int n) {
    const int period = 2 * n;
    int j = ((i % period) + period) % period;
    return j < n ? j : period - 1 - j;
  };
  for (int n = 1; n <= 5; ++n)
    for (int i = -3 * n; i <= 3 * n; ++i) CHECK(mirror_index(i, n) == oracle(i, n));
}

TEST_CASE("extract_sample: degenerate window, corner mirroring, interior slice") {
  const SyntheticScene scene = generate_synthetic(16, 16, 6, 2, 5);
  const HsiCube norm = normalize(scene.cube);
  const ReducedCube red = pca_reduce(norm, 3);

  SUBCASE("w = 1 gives the pixel's own score vector") {
    const Sample s = extract_sample(norm, red, 4, 7, 1);
    CHECK(s.patch.shape == std::vector<int>{1, 1, 3});
    for (int j = 0; j < 3; ++j) CHECK(s.patch.at(0, 0, j) == red.at(4, 7, j));
    CHECK(s.spectral.isApprox(norm.spectrum(4, 7)));
  }
  SUBCASE("interior pixel far from borders equals the plain window") {
    const Sample s = extract_sample(norm, red, 8, 8, 4);
    for (int dy = 0; dy < 4; ++dy)
      for (int dx = 0; dx < 4; ++dx)
        for (int j = 0; j < 3; ++j)
          CHECK(s.patch.at(dy, dx, j) == red.at(8 + dy - 2, 8 + dx - 2, j));
  }
  SUBCASE("pixel outside the image") {
    CHECK_THROWS_AS(extract_sample(norm, red, 16, 0, 4), ParamError);
    CHECK_THROWS_AS(extract_sample(norm, red, 0, -1, 4), ParamError);
  }
}

TEST_CASE("extract_sample: corner pixel on a 3x3 grid matches the hand-mirrored oracle") {
  HsiCube cube;
  cube.rows = cube.cols = 3;
  cube.bands = 1;
  cube.values = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  const ReducedCube red = pca_reduce(cube, 1);

  const Sample s = extract_sample(cube, red, 0, 0, 4);
  // window rows/cols span source indices -2..1, which mirror to 1, 0, 0, 1
  const int m[4] = {1, 0, 0, 1};
  for (int dy = 0; dy < 4; ++dy)
    for (int dx = 0; dx < 4; ++dx)
      CHECK(s.patch.at(dy, dx, 0) == red.at(m[dy], m[dx], 0));
}

TEST_CASE("patch values always come from the mirrored index set (5x5 oracle)") {
  const SyntheticScene scene = generate_synthetic(5, 20, 4, 2, 9);
  const HsiCube norm = normalize(scene.cube);
  const ReducedCube red = pca_reduce(norm, 2);
  const int w = 4;
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 20; ++c) {
      const Sample s = extract_sample(norm, red, r, c, w);
      for (int dy = 0; dy < w; ++dy)
        for (int dx = 0; dx < w; ++dx) {
          const int sr = mirror_index(r + dy - w / 2, 5);
          const int sc = mirror_index(c + dx - w / 2, 20);
          for (int j = 0; j < 2; ++j) CHECK(s.patch.at(dy, dx, j) == red.at(sr, sc, j));
        }
    }
}

TEST_CASE("split_dataset: partition, exhaustion, determinism, warning") {
  LabelMap lm;
  lm.rows = 6;
  lm.cols = 6;
  lm.labels.assign(36, 0);
  // class 1: 10 pixels, class 2: exactly 5, class 3: only 2
  for (int i = 0; i < 10; ++i) lm.labels[i] = 1;
  for (int i = 10; i < 15; ++i) lm.labels[i] = 2;
  lm.labels[15] = lm.labels[16] = 3;

  const SplitSpec spec = split_dataset(lm, 5, 42);
  CHECK(spec.labeled_per_class.size() == 3);
  CHECK(spec.labeled_per_class[0].size() == 5);
  CHECK(spec.labeled_per_class[1].size() == 5);  // exhausted, none left for test
  CHECK(spec.labeled_per_class[2].size() == 2);  // short class: take all + warning
  REQUIRE(spec.warnings.size() == 1);
  CHECK(spec.warnings[0].find("class 3") != std::string::npos);

  // labeled and test partition the reference pixels
  std::set<std::pair<int, int>> seen;
  for (const auto& px : spec.all_labeled()) CHECK(seen.insert(px).second);
  for (const auto& px : spec.test) CHECK(seen.insert(px).second);
  CHECK(seen.size() == 17);
  for (const auto& [r, c] : seen) CHECK(lm.at(r, c) > 0);
  for (const auto& [r, c] : spec.test) CHECK(lm.at(r, c) != 2);

  const SplitSpec again = split_dataset(lm, 5, 42);
  CHECK(again.labeled_per_class == spec.labeled_per_class);
  CHECK(again.test == spec.test);
  const SplitSpec other = split_dataset(lm, 5, 43);
  CHECK(other.labeled_per_class != spec.labeled_per_class);
}

TEST_CASE("sample_unlabeled: exhaustion, distinctness, determinism, clamp") {
  LabelMap lm;
  lm.rows = 4;
  lm.cols = 4;
  lm.labels = {1, 1, 0, 2, 2, 0, 1, 2, 0, 0, 1, 1, 2, 2, 0, 0};
  int reference = 0;
  for (int l : lm.labels) reference += l > 0;

  const UnlabeledPool all = sample_unlabeled(lm, reference, 7);
  CHECK(static_cast<int>(all.indices.size()) == reference);
  std::set<std::pair<int, int>> seen(all.indices.begin(), all.indices.end());
  CHECK(static_cast<int>(seen.size()) == reference);
  for (const auto& [r, c] : seen) CHECK(lm.at(r, c) > 0);

  const UnlabeledPool again = sample_unlabeled(lm, reference, 7);
  CHECK(again.indices == all.indices);

  const UnlabeledPool clamped = sample_unlabeled(lm, reference + 5, 7);
  CHECK(static_cast<int>(clamped.indices.size()) == reference);
  REQUIRE(clamped.warnings.size() == 1);
  CHECK(clamped.warnings[0].find("clamping") != std::string::npos);
}

TEST_CASE("augment: zero std is the identity, label and shapes untouched") {
  const SyntheticScene scene = generate_synthetic(10, 10, 4, 2, 2);
  const HsiCube norm = normalize(scene.cube);
  const ReducedCube red = pca_reduce(norm, 2);
  Sample s = extract_sample(norm, red, 3, 3, 4);
  s.label = 2;

  RngStream stream(99);
  const Sample zero = augment(s, 0.0, stream);
  CHECK(zero.spectral == s.spectral);
  CHECK(zero.patch.values == s.patch.values);
  CHECK(zero.label == s.label);

  const Sample a = augment(s, 0.5, stream);
  const Sample b = augment(s, 0.5, stream);
  CHECK(a.patch.shape == s.patch.shape);
  CHECK(a.label == s.label);
  CHECK(a.spectral != s.spectral);      // stochasticity
  CHECK(a.spectral != b.spectral);      // successive calls differ
  CHECK(s.label == 2);                  // input unmodified
}

TEST_CASE("augment noise moments over 1e5 draws") {
  Sample s;
  s.spectral = Eigen::VectorXd::Zero(100000);
  s.patch = Tensor({1, 1, 1});
  RngStream stream(2024);
  const Sample noisy = augment(s, 0.5, stream);
  const double mean = noisy.spectral.mean();
  const double var = (noisy.spectral.array() - mean).square().sum() / (noisy.spectral.size() - 1);
  CHECK(std::abs(mean) <= 0.01);
  CHECK(std::abs(std::sqrt(var) - 0.5) <= 0.01);
}

TEST_CASE("generate_synthetic: labels, determinism, degenerate noise, preconditions") {
  const SyntheticScene scene = generate_synthetic(16, 16, 8, 3, 11);
  std::vector<int> counts(4, 0);
  for (int l : scene.labels.labels) {
    REQUIRE(l >= 1);
    REQUIRE(l <= 3);
    ++counts[l];
  }
  for (int c = 1; c <= 3; ++c) CHECK(counts[c] > 0);

  const SyntheticScene again = generate_synthetic(16, 16, 8, 3, 11);
  CHECK(again.cube.values == scene.cube.values);
  CHECK(again.labels.labels == scene.labels.labels);

  const SyntheticScene clean = generate_synthetic(16, 16, 8, 3, 11, 0.0);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) {
      const int cls = clean.labels.at(r, c) - 1;
      const Eigen::VectorXd spec = clean.cube.spectrum(r, c);
      CHECK((spec - clean.signatures.row(cls).transpose()).cwiseAbs().maxCoeff() <= 1e-6);
    }

  CHECK_THROWS_AS(generate_synthetic(16, 16, 8, 1, 0), ParamError);
  CHECK_THROWS_AS(generate_synthetic(5, 5, 8, 2, 0), ParamError);  // grid too small
}

TEST_CASE("synthetic scene: nearest-true-signature classifier beats 95%") {
  const SyntheticScene scene = generate_synthetic(64, 64, 16, 5, 0, 0.1);
  long correct = 0;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) {
      const Eigen::VectorXd spec = scene.cube.spectrum(r, c);
      int best = 0;
      double best_d = (spec - scene.signatures.row(0).transpose()).squaredNorm();
      for (int cls = 1; cls < 5; ++cls) {
        const double d = (spec - scene.signatures.row(cls).transpose()).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = cls;
        }
      }
      correct += (best + 1 == scene.labels.at(r, c));
    }
  CHECK(static_cast<double>(correct) / (64 * 64) > 0.95);
}
