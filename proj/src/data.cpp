#include "rsen/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "rsen/errors.hpp"

namespace rsen {

Eigen::VectorXd HsiCube::spectrum(int r, int c) const {
  Eigen::VectorXd v(bands);
  const float* src = values.data() + (static_cast<std::size_t>(r) * cols + c) * bands;
  for (int b = 0; b < bands; ++b) v[b] = static_cast<double>(src[b]);
  return v;
}

int LabelMap::max_label() const {
  int m = 0;
  for (int l : labels) m = std::max(m, l);
  return m;
}

std::vector<std::pair<int, int>> SplitSpec::all_labeled() const {
  std::vector<std::pair<int, int>> out;
  for (const auto& cls : labeled_per_class) out.insert(out.end(), cls.begin(), cls.end());
  return out;
}

// ---- HSC1 ------------------------------------------------------------------
// bytes 0-3 "HSC1"; u32le rows, cols, bands; then rows*cols*bands f32le in
// band-interleaved-by-pixel order.

namespace {

std::uint32_t le32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_le32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

HsiCube load_cube(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("load_cube: cannot open " + path);
  unsigned char header[16];
  if (!is.read(reinterpret_cast<char*>(header), 16))
    throw FormatError("load_cube: " + path + ": truncated header at byte offset " +
                      std::to_string(is.gcount()));
  if (std::memcmp(header, "HSC1", 4) != 0)
    throw FormatError("load_cube: " + path + ": bad magic at byte offset 0");
  HsiCube cube;
  cube.rows = static_cast<int>(le32(header + 4));
  cube.cols = static_cast<int>(le32(header + 8));
  cube.bands = static_cast<int>(le32(header + 12));
  if (cube.rows <= 0 || cube.cols <= 0 || cube.bands <= 0)
    throw FormatError("load_cube: " + path + ": non-positive dimension in header");
  const std::size_t count =
      static_cast<std::size_t>(cube.rows) * cube.cols * cube.bands;
  cube.values.resize(count);
  static_assert(sizeof(float) == 4);
  is.read(reinterpret_cast<char*>(cube.values.data()),
          static_cast<std::streamsize>(count * 4));
  if (static_cast<std::size_t>(is.gcount()) != count * 4)
    throw FormatError("load_cube: " + path + ": truncated payload at byte offset " +
                      std::to_string(16 + is.gcount()));
  // must be exactly the declared size
  char extra;
  if (is.read(&extra, 1))
    throw FormatError("load_cube: " + path + ": trailing data at byte offset " +
                      std::to_string(16 + count * 4));
  for (std::size_t i = 0; i < count; ++i)
    if (!std::isfinite(cube.values[i]))
      throw FormatError("load_cube: " + path + ": non-finite value at byte offset " +
                        std::to_string(16 + i * 4));
  return cube;
}

void save_cube(const HsiCube& cube, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("save_cube: cannot open " + path);
  os.write("HSC1", 4);
  put_le32(os, static_cast<std::uint32_t>(cube.rows));
  put_le32(os, static_cast<std::uint32_t>(cube.cols));
  put_le32(os, static_cast<std::uint32_t>(cube.bands));
  os.write(reinterpret_cast<const char*>(cube.values.data()),
           static_cast<std::streamsize>(cube.values.size() * 4));
  if (!os) throw FormatError("save_cube: write failed on " + path);
}

LabelMap load_labels(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("load_labels: cannot open " + path);
  LabelMap lm;
  if (!(is >> lm.rows >> lm.cols) || lm.rows <= 0 || lm.cols <= 0)
    throw FormatError("load_labels: " + path + ": bad dimension line");
  lm.labels.resize(static_cast<std::size_t>(lm.rows) * lm.cols);
  for (std::size_t i = 0; i < lm.labels.size(); ++i) {
    if (!(is >> lm.labels[i]))
      throw FormatError("load_labels: " + path + ": truncated at entry " + std::to_string(i));
    if (lm.labels[i] < 0)
      throw FormatError("load_labels: " + path + ": negative label at entry " + std::to_string(i));
  }
  return lm;
}

void save_labels(const LabelMap& labels, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("save_labels: cannot open " + path);
  os << labels.rows << " " << labels.cols << "\n";
  for (int r = 0; r < labels.rows; ++r) {
    for (int c = 0; c < labels.cols; ++c) {
      if (c) os << " ";
      os << labels.at(r, c);
    }
    os << "\n";
  }
  if (!os) throw FormatError("save_labels: write failed on " + path);
}

// ---- preprocessing ---------------------------------------------------------

HsiCube normalize(const HsiCube& cube) {
  HsiCube out = cube;
  const std::size_t pixels = static_cast<std::size_t>(cube.rows) * cube.cols;
  for (int b = 0; b < cube.bands; ++b) {
    float lo = cube.values[b], hi = cube.values[b];
    for (std::size_t px = 0; px < pixels; ++px) {
      const float v = cube.values[px * cube.bands + b];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const float range = hi - lo;
    for (std::size_t px = 0; px < pixels; ++px) {
      float& v = out.values[px * cube.bands + b];
      v = range > 0.0f ? (v - lo) / range : 0.0f;
    }
  }
  return out;
}

ReducedCube pca_reduce(const HsiCube& cube, int p) {
  const int n = cube.bands;
  const long pixels = static_cast<long>(cube.rows) * cube.cols;
  if (p < 1 || p > n)
    throw ParamError("pca_reduce: p = " + std::to_string(p) + " out of range 1.." +
                     std::to_string(n));
  if (pixels < p + 1)
    throw ParamError("pca_reduce: need at least p+1 pixels");

  Eigen::MatrixXd X(pixels, n);
  for (long px = 0; px < pixels; ++px)
    for (int b = 0; b < n; ++b)
      X(px, b) = static_cast<double>(cube.values[static_cast<std::size_t>(px) * n + b]);

  ReducedCube red;
  red.rows = cube.rows;
  red.cols = cube.cols;
  red.p = p;
  red.band_means = X.colwise().mean();
  X.rowwise() -= red.band_means.transpose();
  const Eigen::MatrixXd cov = (X.transpose() * X) / static_cast<double>(pixels);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw ParamError("pca_reduce: eigendecomposition failed");

  // eigenvalues come out ascending; take the top p, descending
  red.loadings.resize(n, p);
  red.explained_variance.resize(p);
  for (int j = 0; j < p; ++j) {
    const int src = n - 1 - j;
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    // sign rule: largest-magnitude entry positive
    int arg = 0;
    for (int i = 1; i < n; ++i)
      if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    if (v[arg] < 0.0) v = -v;
    red.loadings.col(j) = v;
    red.explained_variance[j] = std::max(solver.eigenvalues()[src], 0.0);
  }

  const Eigen::MatrixXd scores = X * red.loadings;  // pixels x p
  red.scores.resize(static_cast<std::size_t>(pixels) * p);
  for (long px = 0; px < pixels; ++px)
    for (int j = 0; j < p; ++j)
      red.scores[static_cast<std::size_t>(px) * p + j] = scores(px, j);
  return red;
}

int mirror_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

Sample extract_sample(const HsiCube& normalized, const ReducedCube& reduced, int r, int c, int w) {
  if (r < 0 || r >= normalized.rows || c < 0 || c >= normalized.cols)
    throw ParamError("extract_sample: pixel (" + std::to_string(r) + ", " + std::to_string(c) +
                     ") outside image");
  if (w < 1) throw ParamError("extract_sample: w must be positive");
  Sample s;
  s.row = r;
  s.col = c;
  s.spectral = normalized.spectrum(r, c);
  s.patch = Tensor({w, w, reduced.p});
  const int off = w / 2;  // pixel sits at (w/2, w/2)
  for (int dy = 0; dy < w; ++dy) {
    const int sr = mirror_index(r + dy - off, reduced.rows);
    for (int dx = 0; dx < w; ++dx) {
      const int sc = mirror_index(c + dx - off, reduced.cols);
      for (int j = 0; j < reduced.p; ++j) s.patch.at(dy, dx, j) = reduced.at(sr, sc, j);
    }
  }
  return s;
}

// ---- splits ----------------------------------------------------------------

namespace {
constexpr std::uint64_t kTagSplit = 0x53504c54ULL;   // "SPLT"
constexpr std::uint64_t kTagUnlab = 0x554e4c42ULL;   // "UNLB"
constexpr std::uint64_t kTagSynth = 0x53594e54ULL;   // "SYNT"
}  // namespace

SplitSpec split_dataset(const LabelMap& labels, int n_per_class, std::uint64_t seed) {
  if (n_per_class < 1) throw ParamError("split_dataset: n_per_class must be positive");
  const int k = labels.max_label();
  if (k < 1) throw ParamError("split_dataset: label map has no reference pixels");

  std::vector<std::vector<std::pair<int, int>>> per_class(k);
  for (int r = 0; r < labels.rows; ++r)
    for (int c = 0; c < labels.cols; ++c)
      if (labels.at(r, c) > 0) per_class[labels.at(r, c) - 1].emplace_back(r, c);

  SplitSpec spec;
  spec.seed = seed;
  spec.labeled_per_class.resize(k);
  std::vector<char> taken(static_cast<std::size_t>(labels.rows) * labels.cols, 0);
  for (int cls = 0; cls < k; ++cls) {
    auto& pool = per_class[cls];
    if (pool.empty()) {
      spec.warnings.push_back("class " + std::to_string(cls + 1) + " has no pixels");
      continue;
    }
    RngStream stream(stream_key(seed, kTagSplit, static_cast<std::uint64_t>(cls)));
    stream.shuffle(pool);
    int take = n_per_class;
    if (static_cast<int>(pool.size()) < n_per_class) {
      take = static_cast<int>(pool.size());
      spec.warnings.push_back("class " + std::to_string(cls + 1) + " has only " +
                              std::to_string(take) + " pixels; taking all");
    }
    for (int i = 0; i < take; ++i) {
      spec.labeled_per_class[cls].push_back(pool[i]);
      taken[static_cast<std::size_t>(pool[i].first) * labels.cols + pool[i].second] = 1;
    }
  }
  for (int r = 0; r < labels.rows; ++r)
    for (int c = 0; c < labels.cols; ++c)
      if (labels.at(r, c) > 0 && !taken[static_cast<std::size_t>(r) * labels.cols + c])
        spec.test.emplace_back(r, c);
  return spec;
}

UnlabeledPool sample_unlabeled(const LabelMap& labels, int n_u, std::uint64_t seed) {
  if (n_u < 0) throw ParamError("sample_unlabeled: n_u must be non-negative");
  std::vector<std::pair<int, int>> pool;
  for (int r = 0; r < labels.rows; ++r)
    for (int c = 0; c < labels.cols; ++c)
      if (labels.at(r, c) > 0) pool.emplace_back(r, c);

  UnlabeledPool out;
  if (n_u > static_cast<int>(pool.size())) {
    out.warnings.push_back("requested " + std::to_string(n_u) + " unlabeled samples but only " +
                           std::to_string(pool.size()) + " reference pixels; clamping");
    n_u = static_cast<int>(pool.size());
  }
  RngStream stream(stream_key(seed, kTagUnlab));
  stream.shuffle(pool);
  out.indices.assign(pool.begin(), pool.begin() + n_u);
  return out;
}

// ---- augmentation ----------------------------------------------------------

Sample augment(const Sample& sample, double noise_std, RngStream& stream) {
  Sample out = sample;
  for (int i = 0; i < out.spectral.size(); ++i) out.spectral[i] += noise_std * stream.normal();
  for (int i = 0; i < out.patch.size(); ++i) out.patch[i] += noise_std * stream.normal();
  return out;
}

// ---- synthetic scenes ------------------------------------------------------

SyntheticScene generate_synthetic(int rows, int cols, int bands, int k, std::uint64_t seed,
                                  double noise_std) {
  if (k < 2) throw ParamError("generate_synthetic: k must be >= 2");
  if (rows < 1 || cols < 1 || bands < 1)
    throw ParamError("generate_synthetic: non-positive dimension");
  if (static_cast<long>(rows) * cols < 50L * k)
    throw ParamError("generate_synthetic: grid too small, need rows*cols >= 50*k");
  if (noise_std < 0.0) throw ParamError("generate_synthetic: negative noise std");

  RngStream stream(stream_key(seed, kTagSynth));

  // class signatures: smooth sinusoid curves over bands, redrawn until
  // pairwise separated so a nearest-mean oracle stays reliable
  Eigen::MatrixXd sig(k, bands);
  const double min_dist = 0.8;
  for (int c = 0; c < k; ++c) {
    bool accepted = false;
    for (int attempt = 0; attempt < 10000 && !accepted; ++attempt) {
      const double freq = 1.0 + std::floor(stream.uniform() * 3.0);
      const double phase = 2.0 * std::numbers::pi * stream.uniform();
      const double amp = 0.25 + 0.15 * stream.uniform();
      const double offset = 0.35 + 0.3 * stream.uniform();
      for (int b = 0; b < bands; ++b)
        sig(c, b) = offset + amp * std::sin(2.0 * std::numbers::pi * freq * b / bands + phase);
      accepted = true;
      for (int prev = 0; prev < c; ++prev)
        if ((sig.row(c) - sig.row(prev)).norm() < min_dist) accepted = false;
    }
    if (!accepted)
      throw ParamError("generate_synthetic: could not separate class signatures");
  }

  // k spatially contiguous regions by nearest seed point
  // distinct centers, so each class owns at least its own seed pixel
  std::vector<std::pair<int, int>> centers(k);
  for (int c = 0; c < k; ++c) {
    std::pair<int, int> cand;
    do {
      cand = {static_cast<int>(stream.below(rows)), static_cast<int>(stream.below(cols))};
    } while (std::find(centers.begin(), centers.begin() + c, cand) != centers.begin() + c);
    centers[c] = cand;
  }

  SyntheticScene scene;
  scene.signatures = sig;
  scene.labels.rows = rows;
  scene.labels.cols = cols;
  scene.labels.labels.resize(static_cast<std::size_t>(rows) * cols);
  scene.cube.rows = rows;
  scene.cube.cols = cols;
  scene.cube.bands = bands;
  scene.cube.values.resize(static_cast<std::size_t>(rows) * cols * bands);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      int best = 0;
      long best_d2 = -1;
      for (int cl = 0; cl < k; ++cl) {
        const long dr = r - centers[cl].first, dc = c - centers[cl].second;
        const long d2 = dr * dr + dc * dc;
        if (best_d2 < 0 || d2 < best_d2) {  // ties go to the smaller class id
          best_d2 = d2;
          best = cl;
        }
      }
      scene.labels.at(r, c) = best + 1;
      for (int b = 0; b < bands; ++b)
        scene.cube.at(r, c, b) =
            static_cast<float>(sig(best, b) + noise_std * stream.normal());
    }
  }
  return scene;
}

}  // namespace rsen
