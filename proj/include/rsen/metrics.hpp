#pragma once

#include <array>
#include <string>
#include <vector>

namespace rsen {

// entry (i, j): samples of true class i predicted as class j, 1-based labels
struct ConfusionMatrix {
  int k = 0;
  std::vector<long> counts;  // k x k, row-major

  long& at(int true_cls, int pred_cls) {
    return counts[static_cast<std::size_t>(true_cls - 1) * k + (pred_cls - 1)];
  }
  long at(int true_cls, int pred_cls) const {
    return counts[static_cast<std::size_t>(true_cls - 1) * k + (pred_cls - 1)];
  }
  long total() const;
};

struct MetricsReport {
  double oa = 0.0;
  double kappa = 0.0;
  double aa = 0.0;
  std::vector<double> per_class;  // producer accuracy per class
  std::vector<std::string> warnings;
  double runtime_seconds = 0.0;

  // filled by aggregation across repetitions
  double oa_std = 0.0, kappa_std = 0.0, aa_std = 0.0;
  std::vector<double> per_class_std;
  int repetitions = 1;
};

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& truths,
                          int k);

// OA = trace/total; producer accuracy = diag/row-sum (0 and a warning for
// empty rows); AA = mean of per-class; Cohen's kappa from the marginals
MetricsReport metrics(const ConfusionMatrix& matrix);

// ---- classification maps ---------------------------------------------------

using Rgb = std::array<unsigned char, 3>;

// fixed 16-color palette; class c uses palette[c % 16]
const std::vector<Rgb>& default_palette();

// binary PPM (P6); with mask_background, label-0 pixels render black
void render_map(const std::vector<int>& predictions, int rows, int cols,
                const std::vector<int>& labelmap, const std::vector<Rgb>& palette,
                bool mask_background, const std::string& path);

// one row per repetition plus mean and std rows
void save_metrics_csv(const std::vector<MetricsReport>& per_rep, const MetricsReport& aggregate,
                      const std::string& path);

// sample standard deviation (divide by R-1); 0 when R = 1
MetricsReport aggregate_metrics(const std::vector<MetricsReport>& per_rep);

}  // namespace rsen
