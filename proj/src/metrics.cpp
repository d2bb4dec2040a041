#include "rsen/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "rsen/errors.hpp"

namespace rsen {

long ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), 0L);
}

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& truths,
                          int k) {
  if (predictions.size() != truths.size())
    throw ParamError("confusion: prediction and truth lengths differ");
  if (k < 1) throw ParamError("confusion: k must be >= 1");
  ConfusionMatrix cm;
  cm.k = k;
  cm.counts.assign(static_cast<std::size_t>(k) * k, 0);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] < 1 || truths[i] > k)
      throw ParamError("confusion: truth label " + std::to_string(truths[i]) +
                       " out of range at index " + std::to_string(i));
    if (predictions[i] < 1 || predictions[i] > k)
      throw ParamError("confusion: predicted label " + std::to_string(predictions[i]) +
                       " out of range at index " + std::to_string(i));
    ++cm.at(truths[i], predictions[i]);
  }
  return cm;
}

MetricsReport metrics(const ConfusionMatrix& matrix) {
  const long total = matrix.total();
  if (matrix.k < 1 || total == 0) throw ParamError("metrics: empty confusion matrix");
  const int k = matrix.k;

  MetricsReport rep;
  long diag = 0;
  double pe = 0.0;
  rep.per_class.resize(k);
  for (int i = 1; i <= k; ++i) {
    long row = 0, col = 0;
    for (int j = 1; j <= k; ++j) {
      row += matrix.at(i, j);
      col += matrix.at(j, i);
    }
    diag += matrix.at(i, i);
    pe += static_cast<double>(row) * static_cast<double>(col);
    if (row == 0) {
      rep.per_class[i - 1] = 0.0;
      rep.warnings.push_back("class " + std::to_string(i) + " has no test samples");
    } else {
      rep.per_class[i - 1] = static_cast<double>(matrix.at(i, i)) / static_cast<double>(row);
    }
  }
  pe /= static_cast<double>(total) * static_cast<double>(total);
  rep.oa = static_cast<double>(diag) / static_cast<double>(total);
  rep.kappa = pe >= 1.0 ? 1.0 : (rep.oa - pe) / (1.0 - pe);
  rep.aa = std::accumulate(rep.per_class.begin(), rep.per_class.end(), 0.0) / k;
  rep.per_class_std.assign(k, 0.0);
  return rep;
}

const std::vector<Rgb>& default_palette() {
  static const std::vector<Rgb> palette = {
      {{216, 191, 216}}, {{0, 255, 0}},     {{0, 255, 255}}, {{45, 138, 86}},
      {{255, 0, 255}},   {{255, 165, 0}},   {{159, 31, 239}}, {{255, 0, 0}},
      {{255, 255, 0}},   {{0, 0, 255}},     {{128, 128, 0}},  {{0, 128, 128}},
      {{128, 0, 128}},   {{0, 128, 0}},     {{128, 0, 0}},    {{192, 192, 192}},
  };
  return palette;
}

void render_map(const std::vector<int>& predictions, int rows, int cols,
                const std::vector<int>& labelmap, const std::vector<Rgb>& palette,
                bool mask_background, const std::string& path) {
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  if (predictions.size() != pixels)
    throw ParamError("render_map: predictions must cover all pixels");
  if (mask_background && labelmap.size() != pixels)
    throw ParamError("render_map: label map size mismatch");
  if (palette.empty()) throw ParamError("render_map: empty palette");

  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("render_map: cannot open " + path);
  os << "P6\n" << cols << " " << rows << "\n255\n";
  std::vector<unsigned char> buf(pixels * 3);
  for (std::size_t i = 0; i < pixels; ++i) {
    Rgb color{0, 0, 0};
    if (!(mask_background && labelmap[i] == 0))
      color = palette[static_cast<std::size_t>(predictions[i]) % palette.size()];
    buf[i * 3] = color[0];
    buf[i * 3 + 1] = color[1];
    buf[i * 3 + 2] = color[2];
  }
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!os) throw FormatError("render_map: write failed on " + path);
}

MetricsReport aggregate_metrics(const std::vector<MetricsReport>& per_rep) {
  if (per_rep.empty()) throw ParamError("aggregate_metrics: no repetitions");
  const int r = static_cast<int>(per_rep.size());
  const int k = static_cast<int>(per_rep[0].per_class.size());

  auto mean_of = [&](auto get) {
    double s = 0.0;
    for (const auto& rep : per_rep) s += get(rep);
    return s / r;
  };
  auto std_of = [&](auto get, double mean) {
    if (r == 1) return 0.0;
    double s = 0.0;
    for (const auto& rep : per_rep) s += (get(rep) - mean) * (get(rep) - mean);
    return std::sqrt(s / (r - 1));
  };

  MetricsReport agg;
  agg.repetitions = r;
  agg.oa = mean_of([](const auto& m) { return m.oa; });
  agg.kappa = mean_of([](const auto& m) { return m.kappa; });
  agg.aa = mean_of([](const auto& m) { return m.aa; });
  agg.runtime_seconds = mean_of([](const auto& m) { return m.runtime_seconds; });
  agg.oa_std = std_of([](const auto& m) { return m.oa; }, agg.oa);
  agg.kappa_std = std_of([](const auto& m) { return m.kappa; }, agg.kappa);
  agg.aa_std = std_of([](const auto& m) { return m.aa; }, agg.aa);
  agg.per_class.resize(k);
  agg.per_class_std.resize(k);
  for (int c = 0; c < k; ++c) {
    agg.per_class[c] = mean_of([c](const auto& m) { return m.per_class[c]; });
    agg.per_class_std[c] = std_of([c](const auto& m) { return m.per_class[c]; }, agg.per_class[c]);
  }
  for (const auto& rep : per_rep)
    agg.warnings.insert(agg.warnings.end(), rep.warnings.begin(), rep.warnings.end());
  return agg;
}

void save_metrics_csv(const std::vector<MetricsReport>& per_rep, const MetricsReport& aggregate,
                      const std::string& path) {
  if (per_rep.empty()) throw ParamError("save_metrics_csv: no repetitions");
  const int k = static_cast<int>(per_rep[0].per_class.size());
  std::ofstream os(path);
  if (!os) throw FormatError("save_metrics_csv: cannot open " + path);
  os << std::setprecision(17);
  // runtime stays out of the file so identical runs are byte-identical
  os << "repetition,OA,kappa,AA";
  for (int c = 1; c <= k; ++c) os << ",class" << c;
  os << "\n";
  auto write_row = [&](const std::string& tag, const MetricsReport& m, bool use_std) {
    os << tag << "," << (use_std ? m.oa_std : m.oa) << "," << (use_std ? m.kappa_std : m.kappa)
       << "," << (use_std ? m.aa_std : m.aa);
    for (int c = 0; c < k; ++c) os << "," << (use_std ? m.per_class_std[c] : m.per_class[c]);
    os << "\n";
  };
  for (std::size_t i = 0; i < per_rep.size(); ++i)
    write_row(std::to_string(i + 1), per_rep[i], false);
  write_row("mean", aggregate, false);
  write_row("std", aggregate, true);
  if (!os) throw FormatError("save_metrics_csv: write failed on " + path);
}

}  // namespace rsen
