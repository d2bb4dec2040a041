#include "rsen/experiment.hpp"

#include <chrono>

#include "rsen/errors.hpp"

namespace rsen {

PreparedData prepare_data(const HsiCube& raw, const LabelMap& labels, int p) {
  if (raw.rows != labels.rows || raw.cols != labels.cols)
    throw ParamError("prepare_data: cube is " + std::to_string(raw.rows) + "x" +
                     std::to_string(raw.cols) + " but label map is " +
                     std::to_string(labels.rows) + "x" + std::to_string(labels.cols));
  PreparedData data;
  data.normalized = normalize(raw);
  data.reduced = pca_reduce(data.normalized, p);
  data.k = labels.max_label();
  if (data.k < 2) throw ParamError("prepare_data: need at least 2 classes in the label map");
  return data;
}

std::vector<Sample> extract_labeled(const PreparedData& data, const LabelMap& labels,
                                    const std::vector<std::pair<int, int>>& pixels, int w) {
  std::vector<Sample> out;
  out.reserve(pixels.size());
  for (auto [r, c] : pixels) {
    Sample s = extract_sample(data.normalized, data.reduced, r, c, w);
    s.label = labels.at(r, c);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> extract_unlabeled(const PreparedData& data,
                                      const std::vector<std::pair<int, int>>& pixels, int w) {
  std::vector<Sample> out;
  out.reserve(pixels.size());
  for (auto [r, c] : pixels)
    out.push_back(extract_sample(data.normalized, data.reduced, r, c, w));
  return out;
}

ExperimentResult run_experiment(const TrainConfig& config, const PreparedData& data,
                                const LabelMap& labels, std::uint64_t seed,
                                bool eval_each_epoch) {
  const auto t0 = std::chrono::steady_clock::now();

  ExperimentResult result;
  result.split = split_dataset(labels, config.n_per_class, seed);
  const UnlabeledPool pool = sample_unlabeled(labels, config.n_unlabeled, seed);

  const std::vector<Sample> labeled =
      extract_labeled(data, labels, result.split.all_labeled(), config.w);
  const std::vector<Sample> unlabeled = extract_unlabeled(data, pool.indices, config.w);
  const std::vector<Sample> test = extract_labeled(data, labels, result.split.test, config.w);

  std::vector<int> truths;
  truths.reserve(test.size());
  for (const auto& s : test) truths.push_back(*s.label);

  const NetDims dims{data.normalized.bands, config.p, config.w, data.k};
  TrainConfig run_cfg = config;
  run_cfg.seed = seed;

  EvalHook hook;
  if (eval_each_epoch) {
    hook = [&](const BaseNetParams& student, const BaseNetParams& teacher) {
      const MetricsReport ms = metrics(confusion(predict(student, test), truths, data.k));
      const MetricsReport mt = metrics(confusion(predict(teacher, test), truths, data.k));
      return std::make_pair(ms.oa, mt.oa);
    };
  }

  auto [state, history] = train(run_cfg, dims, labeled, unlabeled, hook);
  result.state = std::move(state);
  result.history = std::move(history);

  result.matrix = confusion(predict(result.state.teacher, test), truths, data.k);
  result.report = metrics(result.matrix);
  for (const auto& w : result.split.warnings) result.report.warnings.push_back(w);
  for (const auto& w : pool.warnings) result.report.warnings.push_back(w);

  result.report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

RepeatResult repeat_experiment(const TrainConfig& config, const PreparedData& data,
                               const LabelMap& labels, int repetitions,
                               std::uint64_t base_seed) {
  if (repetitions < 1) throw ParamError("repeat_experiment: repetitions must be >= 1");
  RepeatResult out;
  out.per_rep.reserve(repetitions);
  for (int r = 0; r < repetitions; ++r) {
    try {
      out.per_rep.push_back(
          run_experiment(config, data, labels, base_seed + static_cast<std::uint64_t>(r)).report);
    } catch (const NumericalError& e) {
      throw NumericalError("repetition " + std::to_string(r + 1) + ": " + e.what(), e.iteration);
    } catch (const std::exception& e) {
      throw ParamError("repetition " + std::to_string(r + 1) + ": " + e.what());
    }
  }
  out.aggregate = aggregate_metrics(out.per_rep);
  return out;
}

}  // namespace rsen
