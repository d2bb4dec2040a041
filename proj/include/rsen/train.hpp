#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rsen/basenet.hpp"
#include "rsen/data.hpp"

namespace rsen {

struct TrainConfig {
  double learning_rate = 5e-4;
  int labeled_batch = 128;
  int unlabeled_batch = 128;
  int epochs = 20;
  double alpha = 0.95;   // EMA smoothing
  int m = 5;             // teacher augmentation copies
  double noise_std = 0.5;
  int w = 16;
  int p = 5;
  int n_per_class = 30;
  int n_unlabeled = 10000;
  std::optional<int> fixed_q;  // overrides the ramp-up when set
  bool no_filter = false;      // mask forced all-ones
  std::uint64_t seed = 0;

  void validate() const;
};

struct AdamState {
  BaseNetParams m1, m2;
  long t = 0;
};

struct EnsembleState {
  BaseNetParams student;  // updated by gradient descent
  BaseNetParams teacher;  // updated only by EMA
  AdamState adam;
  long iter = 0;
};

struct FilterMask {
  std::vector<std::uint8_t> mask;  // 1 = admitted into the consistency loss
  std::vector<int> sorted;         // batch indices by descending cons, stable
  int q = 0;
};

struct HistoryRow {
  long iter;
  double l_cls;
  double l_con;
  int q;
};
struct EpochEval {
  int epoch;
  double oa_student;
  double oa_teacher;
};
struct TrainHistory {
  std::vector<HistoryRow> rows;
  std::vector<EpochEval> evals;
  void save_csv(const std::string& path) const;
};

// ---- self-ensembling primitives --------------------------------------------

struct EnsemblePrediction {
  Eigen::VectorXd mean;
  std::vector<Eigen::VectorXd> copies;
};
// m augmented teacher forwards; copy t uses the stream keyed (base_key, t)
EnsemblePrediction ensemble_mean_prediction(const BaseNetParams& teacher, const Sample& sample,
                                            int m, double noise_std, std::uint64_t base_key);

// negative sum over classes of the population standard deviation; 0 for m = 1
double consistency_value(const std::vector<Eigen::VectorXd>& copies);

// q = round(b * exp(-(1 - iter/iter_max)^2)), clamped into [1, b]
int rampup_q(long iter, long iter_max, int b);

// top-q by cons value, ties broken by smaller batch index
FilterMask build_filter(const std::vector<double>& cons_values, int q);

// sum over masked-in samples of the squared probability residual
double consistency_loss(const std::vector<Eigen::VectorXd>& student_probs,
                        const std::vector<Eigen::VectorXd>& mean_teacher_probs,
                        const FilterMask& mask);

// theta_e <- alpha * theta_e + (1 - alpha) * theta_b
void ema_update(BaseNetParams& teacher, const BaseNetParams& student, double alpha);

// standard Adam, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, bias correction
void adam_step(BaseNetParams& params, const BaseNetParams& grads, AdamState& state, double lr);

// ---- training loop ---------------------------------------------------------

using EvalHook = std::function<std::pair<double, double>(const BaseNetParams& student,
                                                         const BaseNetParams& teacher)>;

std::pair<EnsembleState, TrainHistory> train(const TrainConfig& config, NetDims dims,
                                             const std::vector<Sample>& labeled,
                                             const std::vector<Sample>& unlabeled,
                                             const EvalHook& eval_hook = nullptr);

// un-augmented teacher forward; argmax, ties to the smallest class id
int predict_one(const BaseNetParams& params, const Sample& sample);
std::vector<int> predict(const BaseNetParams& params, const std::vector<Sample>& samples);

}  // namespace rsen
