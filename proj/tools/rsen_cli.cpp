// Command-line front end: synth, train, eval, map, gradcheck.
// Exit codes: 0 ok, 2 input/config error, 3 numerical divergence,
// 4 gradcheck failure.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "rsen/config.hpp"
#include "rsen/data.hpp"
#include "rsen/errors.hpp"
#include "rsen/experiment.hpp"
#include "rsen/gradcheck.hpp"
#include "rsen/metrics.hpp"
#include "rsen/train.hpp"

namespace fs = std::filesystem;
using namespace rsen;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitGradcheck = 4;

int run_synth(int rows, int cols, int bands, int k, std::uint64_t seed, double noise,
              const std::string& prefix) {
  const SyntheticScene scene = generate_synthetic(rows, cols, bands, k, seed, noise);
  save_cube(scene.cube, prefix + ".hsc1");
  save_labels(scene.labels, prefix + ".labels");
  std::cout << "wrote " << prefix << ".hsc1 (" << rows << "x" << cols << "x" << bands
            << ") and " << prefix << ".labels (" << k << " classes)\n";
  return 0;
}

RunConfig resolve_config(const std::string& config_path,
                         const std::vector<std::string>& overrides) {
  RunConfig config;
  if (!config_path.empty()) config = parse_config_file(config_path);
  for (const auto& assignment : overrides) apply_override(config, assignment);
  return config;
}

int run_train(const RunConfig& config) {
  if (config.cube.empty() || config.labels.empty())
    throw ParamError("train: cube and labels paths are required");
  fs::create_directories(config.out_dir);
  write_resolved_config(config, config.out_dir + "/resolved_config.txt");

  const HsiCube raw = load_cube(config.cube);
  const LabelMap labels = load_labels(config.labels);
  const PreparedData data = prepare_data(raw, labels, config.train.p);

  std::vector<MetricsReport> reports;
  ExperimentResult last;
  for (int r = 0; r < config.repetitions; ++r) {
    const std::uint64_t seed = config.train.seed + static_cast<std::uint64_t>(r);
    last = run_experiment(config.train, data, labels, seed, config.eval_each_epoch);
    reports.push_back(last.report);
    std::cout << "repetition " << (r + 1) << "/" << config.repetitions << ": OA = "
              << last.report.oa << ", kappa = " << last.report.kappa << ", AA = "
              << last.report.aa << " (" << last.report.runtime_seconds << " s)\n";
  }
  save_checkpoint(config.checkpoint_path(), last.state.student, last.state.teacher);
  last.history.save_csv(config.out_dir + "/history.csv");
  save_metrics_csv(reports, aggregate_metrics(reports), config.out_dir + "/metrics.csv");
  for (const auto& w : last.report.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

std::vector<Sample> reference_samples(const PreparedData& data, const LabelMap& labels, int w,
                                      std::vector<int>& truths) {
  std::vector<std::pair<int, int>> pixels;
  for (int r = 0; r < labels.rows; ++r)
    for (int c = 0; c < labels.cols; ++c)
      if (labels.at(r, c) > 0) pixels.emplace_back(r, c);
  for (auto [r, c] : pixels) truths.push_back(labels.at(r, c));
  return extract_labeled(data, labels, pixels, w);
}

int run_eval(const std::string& checkpoint_path, const std::string& cube_path,
             const std::string& labels_path, const std::string& out_path) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const HsiCube raw = load_cube(cube_path);
  const LabelMap labels = load_labels(labels_path);
  if (raw.bands != ck.teacher.dims.n)
    throw ParamError("eval: cube has " + std::to_string(raw.bands) +
                     " bands but checkpoint expects " + std::to_string(ck.teacher.dims.n));
  if (labels.max_label() > ck.teacher.dims.k)
    throw ParamError("eval: label map has class " + std::to_string(labels.max_label()) +
                     " but checkpoint has k = " + std::to_string(ck.teacher.dims.k));
  const PreparedData data = prepare_data(raw, labels, ck.teacher.dims.p);
  std::vector<int> truths;
  const std::vector<Sample> samples =
      reference_samples(data, labels, ck.teacher.dims.w, truths);
  const MetricsReport report =
      metrics(confusion(predict(ck.teacher, samples), truths, ck.teacher.dims.k));
  save_metrics_csv({report}, aggregate_metrics({report}), out_path);
  std::cout << "OA = " << report.oa << ", kappa = " << report.kappa << ", AA = " << report.aa
            << "\n";
  return 0;
}

int run_map(const std::string& checkpoint_path, const std::string& cube_path,
            const std::string& labels_path, bool mask_background, const std::string& out_path) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const HsiCube raw = load_cube(cube_path);
  if (raw.bands != ck.teacher.dims.n)
    throw ParamError("map: cube has " + std::to_string(raw.bands) +
                     " bands but checkpoint expects " + std::to_string(ck.teacher.dims.n));
  LabelMap labels;
  if (!labels_path.empty()) {
    labels = load_labels(labels_path);
  } else {
    if (mask_background) throw ParamError("map: background masking needs a label file");
    labels.rows = raw.rows;
    labels.cols = raw.cols;
    labels.labels.assign(static_cast<std::size_t>(raw.rows) * raw.cols, 1);
  }
  const PreparedData data = prepare_data(raw, labels, ck.teacher.dims.p);

  std::vector<std::pair<int, int>> pixels;
  for (int r = 0; r < raw.rows; ++r)
    for (int c = 0; c < raw.cols; ++c) pixels.emplace_back(r, c);
  const std::vector<int> preds =
      predict(ck.teacher, extract_unlabeled(data, pixels, ck.teacher.dims.w));
  render_map(preds, raw.rows, raw.cols, labels.labels, default_palette(), mask_background,
             out_path);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int run_gradcheck(std::uint64_t seed, bool corrupt) {
  const NetDims dims{8, 2, 8, 3};
  const GradCheckReport report = gradcheck_full_model(seed, dims, 30, corrupt);
  std::printf("%-10s %12s %8s\n", "layer", "max_rel_err", "checked");
  for (const auto& layer : report.layers)
    std::printf("%-10s %12.3e %8d\n", layer.name.c_str(), layer.max_rel_err,
                layer.entries_checked);
  std::printf("overall max relative error: %.3e\n", report.max_rel_err);
  if (report.max_rel_err > 1e-4) {
    std::printf("FAIL (tolerance 1e-4)\n");
    return kExitGradcheck;
  }
  std::printf("PASS (tolerance 1e-4)\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust self-ensembling network for hyperspectral patch classification"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene (HSC1 + labels)");
  int s_rows = 64, s_cols = 64, s_bands = 16, s_k = 5;
  std::uint64_t s_seed = 0;
  double s_noise = 0.1;
  std::string s_prefix = "synthetic";
  synth->add_option("--rows", s_rows);
  synth->add_option("--cols", s_cols);
  synth->add_option("--bands", s_bands);
  synth->add_option("--k", s_k);
  synth->add_option("--seed", s_seed);
  synth->add_option("--noise", s_noise);
  synth->add_option("--out-prefix", s_prefix);

  // train
  auto* train_cmd = app.add_subcommand("train", "train RSEN and write checkpoint + metrics");
  std::string t_config;
  std::vector<std::string> t_sets;
  train_cmd->add_option("--config", t_config, "key = value config file");
  train_cmd->add_option("--set", t_sets, "override, key=value (repeatable)");
  std::string t_cube, t_labels, t_outdir;
  int t_epochs = -1, t_unlabeled = -1, t_reps = -1;
  std::int64_t t_seed = -1;
  bool t_nofilter = false, t_eval = false;
  train_cmd->add_option("--cube", t_cube);
  train_cmd->add_option("--labels", t_labels);
  train_cmd->add_option("--out-dir", t_outdir);
  train_cmd->add_option("--epochs", t_epochs);
  train_cmd->add_option("--unlabeled", t_unlabeled, "unlabeled pool size, 0 = supervised only");
  train_cmd->add_option("--repetitions", t_reps);
  train_cmd->add_option("--seed", t_seed);
  train_cmd->add_flag("--no-filter", t_nofilter, "consistency mask forced all-ones");
  train_cmd->add_flag("--eval-each-epoch", t_eval);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on labeled data");
  std::string e_ckpt, e_cube, e_labels, e_out = "metrics.csv";
  eval_cmd->add_option("--checkpoint", e_ckpt)->required();
  eval_cmd->add_option("--cube", e_cube)->required();
  eval_cmd->add_option("--labels", e_labels)->required();
  eval_cmd->add_option("--out", e_out);

  // map
  auto* map_cmd = app.add_subcommand("map", "render a classification map (PPM)");
  std::string m_ckpt, m_cube, m_labels, m_out = "map.ppm";
  bool m_mask = false;
  map_cmd->add_option("--checkpoint", m_ckpt)->required();
  map_cmd->add_option("--cube", m_cube)->required();
  map_cmd->add_option("--labels", m_labels);
  map_cmd->add_option("--out", m_out);
  map_cmd->add_flag("--mask-background", m_mask, "render label-0 pixels black");

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient self-check");
  std::uint64_t g_seed = 0;
  bool g_corrupt = false;
  grad_cmd->add_option("--seed", g_seed);
  grad_cmd->add_flag("--corrupt-gradients", g_corrupt, "negative control, must fail");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return run_synth(s_rows, s_cols, s_bands, s_k, s_seed, s_noise, s_prefix);
    if (*train_cmd) {
      RunConfig config = resolve_config(t_config, t_sets);
      if (!t_cube.empty()) config.cube = t_cube;
      if (!t_labels.empty()) config.labels = t_labels;
      if (!t_outdir.empty()) config.out_dir = t_outdir;
      if (t_epochs >= 0) config.train.epochs = t_epochs;
      if (t_unlabeled >= 0) config.train.n_unlabeled = t_unlabeled;
      if (t_reps >= 0) config.repetitions = t_reps;
      if (t_seed >= 0) config.train.seed = static_cast<std::uint64_t>(t_seed);
      if (t_nofilter) config.train.no_filter = true;
      if (t_eval) config.eval_each_epoch = true;
      try {
        return run_train(config);
      } catch (const NumericalError& e) {
        fs::create_directories(config.out_dir);
        std::ofstream diag(config.out_dir + "/diagnostic.txt");
        diag << e.what() << "\niteration = " << e.iteration << "\n";
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
      }
    }
    if (*eval_cmd) return run_eval(e_ckpt, e_cube, e_labels, e_out);
    if (*map_cmd) return run_map(m_ckpt, m_cube, m_labels, m_mask, m_out);
    if (*grad_cmd) return run_gradcheck(g_seed, g_corrupt);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
