#include "rsen/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <thread>

#include "rsen/errors.hpp"
#include "rsen/parallel.hpp"

namespace rsen {

namespace {

constexpr std::uint64_t kTagAugLabeled = 0x4155474cULL;  // "AUGL"
constexpr std::uint64_t kTagAugTeacher = 0x41554754ULL;  // "AUGT"
constexpr std::uint64_t kTagAugStudent = 0x41554753ULL;  // "AUGS"
constexpr std::uint64_t kTagShufLab = 0x5348464cULL;     // "SHFL"
constexpr std::uint64_t kTagShufUnlab = 0x53484655ULL;   // "SHFU"

// Chunked deterministic parallel loop: work is cut into fixed-size chunks
// regardless of worker count, so the chunk -> slot mapping (and therefore any
// reduction done in chunk order) never depends on scheduling.
template <typename Fn>
void for_chunks(int n, int chunk_size, Fn&& fn) {
  if (n <= 0) return;
  const int n_chunks = (n + chunk_size - 1) / chunk_size;
  const int workers = std::min(worker_count(), n_chunks);
  if (workers <= 1) {
    for (int c = 0; c < n_chunks; ++c)
      fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (int c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1))
        fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    });
  }
  for (auto& th : pool) th.join();
}

constexpr int kGradChunk = 16;

}  // namespace

void TrainConfig::validate() const {
  if (alpha < 0.0 || alpha > 1.0) throw ParamError("TrainConfig: alpha must be in [0, 1]");
  if (m < 1) throw ParamError("TrainConfig: m must be >= 1");
  if (labeled_batch < 1 || unlabeled_batch < 1)
    throw ParamError("TrainConfig: batch sizes must be >= 1");
  if (epochs < 0) throw ParamError("TrainConfig: epochs must be >= 0");
  if (learning_rate <= 0.0) throw ParamError("TrainConfig: learning rate must be positive");
  if (noise_std < 0.0) throw ParamError("TrainConfig: noise std must be >= 0");
  if (fixed_q && (*fixed_q < 1 || *fixed_q > unlabeled_batch))
    throw ParamError("TrainConfig: fixed_q must be in [1, unlabeled_batch]");
}

EnsemblePrediction ensemble_mean_prediction(const BaseNetParams& teacher, const Sample& sample,
                                            int m, double noise_std, std::uint64_t base_key) {
  if (m < 1) throw ParamError("ensemble_mean_prediction: m must be >= 1");
  EnsemblePrediction out;
  out.copies.reserve(m);
  for (int t = 0; t < m; ++t) {
    RngStream stream(mix64(base_key ^ static_cast<std::uint64_t>(t)));
    const Sample aug = augment(sample, noise_std, stream);
    out.copies.push_back(forward_probs(teacher, aug.spectral, aug.patch));
  }
  out.mean = out.copies[0];
  for (int t = 1; t < m; ++t) out.mean += out.copies[t];
  out.mean /= static_cast<double>(m);
  return out;
}

double consistency_value(const std::vector<Eigen::VectorXd>& copies) {
  const int m = static_cast<int>(copies.size());
  if (m == 0) throw ParamError("consistency_value: no copies");
  if (m == 1) return 0.0;
  const int k = static_cast<int>(copies[0].size());
  double cons = 0.0;
  for (int j = 0; j < k; ++j) {
    double mean = 0.0;
    for (const auto& p : copies) mean += p[j];
    mean /= m;
    double var = 0.0;  // population variance
    for (const auto& p : copies) var += (p[j] - mean) * (p[j] - mean);
    var /= m;
    cons -= std::sqrt(var);
  }
  return cons;
}

int rampup_q(long iter, long iter_max, int b) {
  if (b < 1) throw ParamError("rampup_q: b must be >= 1");
  if (iter_max <= 0) return b;
  if (iter < 0 || iter > iter_max) throw ParamError("rampup_q: iter out of [0, iter_max]");
  const double frac = static_cast<double>(iter) / static_cast<double>(iter_max);
  const double raw = b * std::exp(-(1.0 - frac) * (1.0 - frac));
  // round half away from zero, then clamp into [1, b]
  const long q = static_cast<long>(std::floor(raw + 0.5));
  return static_cast<int>(std::clamp(q, 1L, static_cast<long>(b)));
}

FilterMask build_filter(const std::vector<double>& cons_values, int q) {
  const int b = static_cast<int>(cons_values.size());
  if (q < 1 || q > b) throw ParamError("build_filter: q out of [1, b]");
  FilterMask fm;
  fm.q = q;
  fm.sorted.resize(b);
  std::iota(fm.sorted.begin(), fm.sorted.end(), 0);
  std::stable_sort(fm.sorted.begin(), fm.sorted.end(),
                   [&](int a, int c) { return cons_values[a] > cons_values[c]; });
  fm.mask.assign(b, 0);
  for (int i = 0; i < q; ++i) fm.mask[fm.sorted[i]] = 1;
  return fm;
}

double consistency_loss(const std::vector<Eigen::VectorXd>& student_probs,
                        const std::vector<Eigen::VectorXd>& mean_teacher_probs,
                        const FilterMask& mask) {
  if (student_probs.size() != mean_teacher_probs.size() ||
      student_probs.size() != mask.mask.size())
    throw ShapeError("consistency_loss: batch size mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < student_probs.size(); ++i) {
    if (!mask.mask[i]) continue;
    if (student_probs[i].size() != mean_teacher_probs[i].size())
      throw ShapeError("consistency_loss: class count mismatch at sample " + std::to_string(i));
    for (int j = 0; j < student_probs[i].size(); ++j) {
      const double d = student_probs[i][j] - mean_teacher_probs[i][j];
      loss += d * d;
    }
  }
  return loss;
}

void ema_update(BaseNetParams& teacher, const BaseNetParams& student, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw ParamError("ema_update: alpha must be in [0, 1]");
  auto rt = param_refs(teacher);
  auto rs = param_refs(student);
  for (std::size_t i = 0; i < rt.size(); ++i) {
    require_shape(rt[i].tensor->shape == rs[i].tensor->shape,
                  std::string("ema_update: shape mismatch on ") + rt[i].name);
    rt[i].tensor->values =
        alpha * rt[i].tensor->values + (1.0 - alpha) * rs[i].tensor->values;
  }
}

void adam_step(BaseNetParams& params, const BaseNetParams& grads, AdamState& state, double lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (state.t == 0) {
    state.m1 = BaseNetParams::zeros(params.dims);
    state.m2 = BaseNetParams::zeros(params.dims);
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  auto rp = param_refs(params);
  auto rg = param_refs(grads);
  auto r1 = param_refs(state.m1);
  auto r2 = param_refs(state.m2);
  for (std::size_t i = 0; i < rp.size(); ++i) {
    require_shape(rp[i].tensor->shape == rg[i].tensor->shape,
                  std::string("adam_step: shape mismatch on ") + rp[i].name);
    auto& p = rp[i].tensor->values;
    const auto& g = rg[i].tensor->values;
    auto& m1 = r1[i].tensor->values;
    auto& m2 = r2[i].tensor->values;
    m1 = beta1 * m1 + (1.0 - beta1) * g;
    m2 = beta2 * m2 + (1.0 - beta2) * g.cwiseProduct(g);
    p -= lr * (m1 / c1).cwiseQuotient(((m2 / c2).cwiseSqrt().array() + eps).matrix());
  }
}

int predict_one(const BaseNetParams& params, const Sample& sample) {
  const Eigen::VectorXd probs = forward_probs(params, sample.spectral, sample.patch);
  int best = 0;
  for (int j = 1; j < probs.size(); ++j)
    if (probs[j] > probs[best]) best = j;
  return best + 1;
}

std::vector<int> predict(const BaseNetParams& params, const std::vector<Sample>& samples) {
  std::vector<int> out(samples.size());
  for_chunks(static_cast<int>(samples.size()), 64, [&](int, int begin, int end) {
    for (int i = begin; i < end; ++i) out[i] = predict_one(params, samples[i]);
  });
  return out;
}

std::pair<EnsembleState, TrainHistory> train(const TrainConfig& config, NetDims dims,
                                             const std::vector<Sample>& labeled,
                                             const std::vector<Sample>& unlabeled,
                                             const EvalHook& eval_hook) {
  config.validate();
  if (labeled.empty()) throw ParamError("train: labeled set is empty");
  for (const auto& s : labeled)
    if (!s.label) throw ParamError("train: labeled sample without a label");

  EnsembleState state;
  state.student = init_params(config.seed, dims);
  state.teacher = state.student;  // teacher starts as a copy
  TrainHistory history;

  const int n_l = static_cast<int>(labeled.size());
  const int n_u = static_cast<int>(unlabeled.size());
  const int b_l = config.labeled_batch;
  const int b_u = config.unlabeled_batch;
  const int iters_per_epoch =
      n_u > 0 ? (n_u + b_u - 1) / b_u : (n_l + b_l - 1) / b_l;
  const long iter_max = static_cast<long>(config.epochs) * iters_per_epoch;

  std::vector<int> order_l(n_l), order_u(n_u);
  std::iota(order_l.begin(), order_l.end(), 0);
  std::iota(order_u.begin(), order_u.end(), 0);

  const int n_grad_chunks_l = (b_l + kGradChunk - 1) / kGradChunk;
  const int n_grad_chunks_u = (b_u + kGradChunk - 1) / kGradChunk;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    {
      RngStream s(stream_key(config.seed, kTagShufLab, static_cast<std::uint64_t>(epoch)));
      s.shuffle(order_l);
    }
    if (n_u > 0) {
      RngStream s(stream_key(config.seed, kTagShufUnlab, static_cast<std::uint64_t>(epoch)));
      s.shuffle(order_u);
    }

    for (int it = 0; it < iters_per_epoch; ++it) {
      const long iter = static_cast<long>(epoch) * iters_per_epoch + it;

      // ---- supervised pass over the labeled mini-batch ----
      std::vector<BaseNetParams> partials(n_grad_chunks_l);
      std::vector<double> chunk_cls(n_grad_chunks_l, 0.0);
      for_chunks(b_l, kGradChunk, [&](int chunk, int begin, int end) {
        BaseNetParams acc = BaseNetParams::zeros(dims);
        for (int j = begin; j < end; ++j) {
          const Sample& src = labeled[order_l[(static_cast<long>(it) * b_l + j) % n_l]];
          RngStream stream(stream_key(config.seed, kTagAugLabeled,
                                      static_cast<std::uint64_t>(iter),
                                      static_cast<std::uint64_t>(j)));
          const Sample aug = augment(src, config.noise_std, stream);
          ForwardTrace trace = forward(state.student, aug.spectral, aug.patch);
          chunk_cls[chunk] += supervised_loss(trace.probs, *src.label);
          trace.loss_node = trace.tape.softmax_cross_entropy(trace.logits, *src.label);
          trace.tape.backward(trace.loss_node,
                              Tensor({1}, Eigen::VectorXd::Constant(1, 1.0 / b_l)));
          accumulate_gradients(acc, trace, 1.0);
        }
        partials[chunk] = std::move(acc);
      });
      BaseNetParams grads = BaseNetParams::zeros(dims);
      double l_cls = 0.0;
      for (int c = 0; c < n_grad_chunks_l; ++c) {
        axpy_params(grads, partials[c], 1.0);
        l_cls += chunk_cls[c];
      }
      l_cls /= b_l;

      // ---- consistency pass over the unlabeled mini-batch ----
      double l_con = 0.0;
      int q_used = 0;
      if (n_u > 0) {
        std::vector<const Sample*> batch_u(b_u);
        for (int j = 0; j < b_u; ++j)
          batch_u[j] = &unlabeled[order_u[(static_cast<long>(it) * b_u + j) % n_u]];

        std::vector<Eigen::VectorXd> teacher_mean(b_u);
        std::vector<double> cons(b_u);
        for_chunks(b_u, kGradChunk, [&](int, int begin, int end) {
          for (int j = begin; j < end; ++j) {
            const std::uint64_t key = stream_key(config.seed, kTagAugTeacher,
                                                 static_cast<std::uint64_t>(iter),
                                                 static_cast<std::uint64_t>(j));
            EnsemblePrediction pred =
                ensemble_mean_prediction(state.teacher, *batch_u[j], config.m,
                                         config.noise_std, key);
            teacher_mean[j] = std::move(pred.mean);
            cons[j] = consistency_value(pred.copies);
          }
        });

        int q;
        if (config.no_filter)
          q = b_u;
        else if (config.fixed_q)
          q = *config.fixed_q;
        else
          q = rampup_q(iter, iter_max, b_u);
        q_used = q;
        const FilterMask mask = build_filter(cons, q);

        std::vector<BaseNetParams> upartials(n_grad_chunks_u);
        std::vector<double> chunk_con(n_grad_chunks_u, 0.0);
        for_chunks(b_u, kGradChunk, [&](int chunk, int begin, int end) {
          BaseNetParams acc = BaseNetParams::zeros(dims);
          for (int j = begin; j < end; ++j) {
            if (!mask.mask[j]) continue;
            RngStream stream(stream_key(config.seed, kTagAugStudent,
                                        static_cast<std::uint64_t>(iter),
                                        static_cast<std::uint64_t>(j)));
            const Sample aug = augment(*batch_u[j], config.noise_std, stream);
            ForwardTrace trace = forward(state.student, aug.spectral, aug.patch);
            const Eigen::VectorXd residual = trace.probs - teacher_mean[j];
            chunk_con[chunk] += residual.squaredNorm();
            trace.tape.backward(trace.probs_node,
                                Tensor::from_vector((2.0 / q) * residual));
            accumulate_gradients(acc, trace, 1.0);
          }
          upartials[chunk] = std::move(acc);
        });
        for (int c = 0; c < n_grad_chunks_u; ++c) {
          axpy_params(grads, upartials[c], 1.0);
          l_con += chunk_con[c];
        }
        l_con /= q;  // gradient scale independent of q
      }

      if (!std::isfinite(l_cls) || !std::isfinite(l_con))
        throw NumericalError("train: non-finite loss at iteration " + std::to_string(iter) +
                                 " (L_cls = " + std::to_string(l_cls) + ", L_con = " +
                                 std::to_string(l_con) + ")",
                             iter);

      adam_step(state.student, grads, state.adam, config.learning_rate);
      ema_update(state.teacher, state.student, config.alpha);
      state.iter = iter + 1;
      history.rows.push_back({iter, l_cls, l_con, q_used});
    }

    if (eval_hook) {
      auto [oa_s, oa_t] = eval_hook(state.student, state.teacher);
      history.evals.push_back({epoch, oa_s, oa_t});
    }
  }
  return {std::move(state), std::move(history)};
}

void TrainHistory::save_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw FormatError("TrainHistory::save_csv: cannot open " + path);
  os << std::setprecision(17);
  const bool with_evals = !evals.empty();
  os << "iteration,L_cls,L_con,q";
  if (with_evals) os << ",epoch,OA_student,OA_teacher";
  os << "\n";
  // evals attach to the last iteration row of their epoch
  const long ipe = with_evals && !rows.empty()
                       ? static_cast<long>(rows.size()) / static_cast<long>(evals.size())
                       : 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    os << r.iter << "," << r.l_cls << "," << r.l_con << "," << r.q;
    if (with_evals) {
      if (ipe > 0 && (static_cast<long>(i) + 1) % ipe == 0 &&
          static_cast<long>(i) / ipe < static_cast<long>(evals.size())) {
        const auto& e = evals[static_cast<std::size_t>(i) / ipe];
        os << "," << e.epoch << "," << e.oa_student << "," << e.oa_teacher;
      } else {
        os << ",,,";
      }
    }
    os << "\n";
  }
  if (!os) throw FormatError("TrainHistory::save_csv: write failed on " + path);
}

}  // namespace rsen
