#pragma once

#include <cstdint>
#include <vector>

#include "rsen/data.hpp"
#include "rsen/metrics.hpp"
#include "rsen/train.hpp"

namespace rsen {

// normalization + PCA, shared across repetitions
struct PreparedData {
  HsiCube normalized;
  ReducedCube reduced;
  int k = 0;
};
PreparedData prepare_data(const HsiCube& raw, const LabelMap& labels, int p);

struct ExperimentResult {
  EnsembleState state;
  TrainHistory history;
  ConfusionMatrix matrix;
  MetricsReport report;  // teacher metrics on the held-out test pixels
  SplitSpec split;
};

// split -> sample unlabeled -> train -> predict -> metrics, one repetition.
// The config's own seed field is ignored; `seed` drives everything.
ExperimentResult run_experiment(const TrainConfig& config, const PreparedData& data,
                                const LabelMap& labels, std::uint64_t seed,
                                bool eval_each_epoch = false);

struct RepeatResult {
  std::vector<MetricsReport> per_rep;
  MetricsReport aggregate;
};

// repetitions with seeds base_seed .. base_seed + R - 1; fresh split and
// fresh unlabeled pool each time
RepeatResult repeat_experiment(const TrainConfig& config, const PreparedData& data,
                               const LabelMap& labels, int repetitions,
                               std::uint64_t base_seed);

// helpers shared with the CLI
std::vector<Sample> extract_labeled(const PreparedData& data, const LabelMap& labels,
                                    const std::vector<std::pair<int, int>>& pixels, int w);
std::vector<Sample> extract_unlabeled(const PreparedData& data,
                                      const std::vector<std::pair<int, int>>& pixels, int w);

}  // namespace rsen
