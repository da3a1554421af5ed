#include "photoread/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "photoread/error.hpp"
#include "photoread/parallel.hpp"
#include "photoread/posterior_grid.hpp"
#include "photoread/rng.hpp"

namespace photoread {

void TrainingRanges::validate() const {
  require(alpha_min > 0.0 && alpha_max > alpha_min, ErrorKind::kConfig, "alpha range must be positive and non-empty");
  require(beta_min > 0.0 && beta_max > beta_min, ErrorKind::kConfig, "beta range must be positive and non-empty");
  require(n_min >= 1 && n_max >= n_min, ErrorKind::kConfig, "shot-count range must satisfy 1 <= n_min <= n_max");
  require(near_anchor_fraction >= 0.0 && near_anchor_fraction <= 1.0, ErrorKind::kConfig,
          "near_anchor_fraction must lie in [0, 1]");
}

void OptimizerConfig::validate() const {
  require(batch_size >= 1 && chunk_size >= 1, ErrorKind::kConfig, "batch and chunk sizes must be positive");
  require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorKind::kConfig, "learning rate must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorKind::kConfig,
          "Adam moment decays must lie in [0, 1)");
  require(epsilon > 0.0, ErrorKind::kConfig, "Adam epsilon must be positive");
  require(epochs >= 1, ErrorKind::kConfig, "epochs must be at least 1");
  require(validation_fraction > 0.0 && validation_fraction < 1.0, ErrorKind::kConfig,
          "validation_fraction must lie in (0, 1)");
  require(patience >= 1, ErrorKind::kConfig, "patience must be at least 1");
  require(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0, ErrorKind::kConfig,
          "final_lr_fraction must lie in (0, 1]");
}

namespace {

double log_uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

}  // namespace

TrainingTask generate_task(const TrainingRanges& ranges, std::uint64_t seed, std::size_t index,
                           std::size_t grid_size) {
  Rng rng(derive_seed(seed, index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  TrainingTask task;
  const bool near_anchor = unit(rng) < ranges.near_anchor_fraction;
  task.g = {log_uniform(rng, ranges.alpha_min, ranges.alpha_max), log_uniform(rng, ranges.beta_min, ranges.beta_max)};
  if (near_anchor) {
    task.f = {task.g.alpha * (1.0 + 0.1 * unit(rng) + 1e-3), task.g.beta};
  } else {
    do {
      task.f = {log_uniform(rng, ranges.alpha_min, ranges.alpha_max),
                log_uniform(rng, ranges.beta_min, ranges.beta_max)};
    } while (task.f.mean() == task.g.mean());
    if (task.f.mean() < task.g.mean()) std::swap(task.f, task.g);
  }
  task.l_true = unit(rng);
  task.n_shots = static_cast<std::size_t>(
      std::lround(log_uniform(rng, static_cast<double>(ranges.n_min), static_cast<double>(ranges.n_max))));
  task.n_shots = std::clamp(task.n_shots, ranges.n_min, ranges.n_max);

  const ShotRecord shots = sample(MixtureModel{task.g, task.f, task.l_true}, task.n_shots, rng());
  const CountHistogram hist = CountHistogram::from_counts(shots.counts);
  const double n = static_cast<double>(hist.total);
  for (std::size_t u = 0; u < hist.unique(); ++u) {
    task.s.push_back(log_pmf(task.f, hist.values[u]) - log_pmf(task.g, hist.values[u]));
    task.weights.push_back(hist.multiplicity[u] / n);
  }
  task.target = compute_posterior(hist, task.g, task.f, PriorSpec::uniform(), grid_size).masses;
  return task;
}

TrainingSet generate_training_set(const TrainingRanges& ranges, std::size_t size, std::uint64_t seed,
                                  std::size_t grid_size) {
  ranges.validate();
  require(size >= 1, ErrorKind::kConfig, "training set size must be at least 1");
  TrainingSet set{ranges, grid_size, seed, std::vector<TrainingTask>(size)};
  const auto count = static_cast<std::ptrdiff_t>(size);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    set.tasks[static_cast<std::size_t>(k)] = generate_task(ranges, seed, static_cast<std::size_t>(k), grid_size);
  }
  return set;
}

Standardization fit_standardization(const std::vector<TrainingTask>& tasks, double s_scale, double count_scale) {
  require(!tasks.empty(), ErrorKind::kConfig, "standardisation needs at least one task");
  Standardization st;
  st.s_scale = s_scale;
  st.count_scale = count_scale;
  std::array<double, 5> sum{}, sq{};
  for (const TrainingTask& t : tasks) {
    const std::array<double, 5> raw = t.aux().raw();
    for (std::size_t i = 0; i < 5; ++i) {
      sum[i] += raw[i];
      sq[i] += raw[i] * raw[i];
    }
  }
  const double n = static_cast<double>(tasks.size());
  for (std::size_t i = 0; i < 5; ++i) {
    st.aux_mean[i] = sum[i] / n;
    const double var = std::max(sq[i] / n - st.aux_mean[i] * st.aux_mean[i], 0.0);
    st.aux_scale[i] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  return st;
}

double quantile(std::vector<double> values, double q) {
  require(!values.empty(), ErrorKind::kDomain, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

KlReport evaluate(const Network& net, const TrainingSet& data) {
  require(data.grid_size == net.arch().grid_size, ErrorKind::kArchitecture,
          "evaluation set grid does not match the network");
  KlReport report;
  report.tasks = data.tasks.size();
  report.per_task.resize(report.tasks);
  const auto count = static_cast<std::ptrdiff_t>(report.tasks);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    const TrainingTask& t = data.tasks[static_cast<std::size_t>(k)];
    report.per_task[static_cast<std::size_t>(k)] = kl_divergence(t.target, net.posterior(t.set(), t.aux()).masses);
  }
  if (report.tasks == 0) return report;
  report.mean = std::accumulate(report.per_task.begin(), report.per_task.end(), 0.0) / static_cast<double>(count);
  report.median = quantile(report.per_task, 0.5);
  report.p95 = quantile(report.per_task, 0.95);
  report.max = *std::max_element(report.per_task.begin(), report.per_task.end());
  return report;
}

namespace {

struct Adam {
  std::vector<std::vector<double>> m, v;
  long step = 0;

  explicit Adam(NetworkWeights& w) {
    for (std::span<double> t : w.tensors()) {
      m.emplace_back(t.size(), 0.0);
      v.emplace_back(t.size(), 0.0);
    }
  }

  void apply(NetworkWeights& w, NetworkWeights& grad, const OptimizerConfig& opt, double lr) {
    ++step;
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
    std::vector<std::span<double>> params = w.tensors();
    std::vector<std::span<double>> grads = grad.tensors();
    for (std::size_t t = 0; t < params.size(); ++t) {
      for (std::size_t i = 0; i < params[t].size(); ++i) {
        const double gi = grads[t][i];
        m[t][i] = opt.beta1 * m[t][i] + (1.0 - opt.beta1) * gi;
        v[t][i] = opt.beta2 * v[t][i] + (1.0 - opt.beta2) * gi * gi;
        params[t][i] -= lr * (m[t][i] / c1) / (std::sqrt(v[t][i] / c2) + opt.epsilon);
      }
    }
  }
};

void zero(NetworkWeights& w) {
  for (std::span<double> t : w.tensors()) std::fill(t.begin(), t.end(), 0.0);
}

void add_into(NetworkWeights& acc, NetworkWeights& part) {
  std::vector<std::span<double>> a = acc.tensors();
  std::vector<std::span<double>> b = part.tensors();
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t i = 0; i < a[t].size(); ++i) a[t][i] += b[t][i];
  }
}

double grad_norm(NetworkWeights& g) {
  double s = 0.0;
  for (std::span<double> t : g.tensors()) {
    for (double x : t) s += x * x;
  }
  return std::sqrt(s);
}

void scale(NetworkWeights& g, double c) {
  for (std::span<double> t : g.tensors()) {
    for (double& x : t) x *= c;
  }
}

double mean_loss(const Network& net, const std::vector<TrainingTask>& tasks, std::span<const std::size_t> idx) {
  std::vector<double> losses(idx.size());
  const auto count = static_cast<std::ptrdiff_t>(idx.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    const TrainingTask& t = tasks[idx[static_cast<std::size_t>(k)]];
    losses[static_cast<std::size_t>(k)] = net.loss_and_gradient(t.set(), t.aux(), t.target, nullptr);
  }
  double s = 0.0;
  for (double l : losses) s += l;
  return s / static_cast<double>(idx.size());
}

}  // namespace

TrainingOutcome train(const TrainingSet& data, const ArchitectureSpec& arch, const OptimizerConfig& opt,
                      std::uint64_t seed, const EpochCallback& on_epoch) {
  opt.validate();
  arch.validate();
  require(data.tasks.size() >= 2, ErrorKind::kConfig, "training needs at least two tasks");
  require(data.grid_size == arch.grid_size, ErrorKind::kArchitecture,
          "training targets and architecture disagree on the grid size");

  const std::size_t n_total = data.tasks.size();
  const std::size_t n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(opt.validation_fraction * static_cast<double>(n_total))), 1, n_total - 1);
  const std::size_t n_train = n_total - n_val;
  std::vector<std::size_t> train_idx(n_train), val_idx(n_val);
  std::iota(train_idx.begin(), train_idx.end(), 0);
  std::iota(val_idx.begin(), val_idx.end(), n_train);

  NetworkWeights init = NetworkWeights::initialise(arch, derive_seed(seed, 0));
  init.standard = fit_standardization(
      std::vector<TrainingTask>(data.tasks.begin(), data.tasks.begin() + static_cast<std::ptrdiff_t>(n_train)));
  init.meta.seed = seed;
  init.meta.tasks = n_total;
  Network net(std::move(init));

  TrainingOutcome out;
  out.report.initial_train_loss = mean_loss(net, data.tasks, train_idx);
  out.weights = net.weights();
  out.report.best_validation_kl = mean_loss(net, data.tasks, val_idx);

  Adam adam(net.mutable_weights());
  NetworkWeights grad = NetworkWeights::zeros_like(net.weights());
  const std::size_t chunks_per_batch = (opt.batch_size + opt.chunk_size - 1) / opt.chunk_size;
  std::vector<NetworkWeights> chunk_grads(chunks_per_batch, grad);
  std::vector<double> chunk_loss(chunks_per_batch);
  int since_best = 0;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    const double progress = opt.epochs > 1 ? static_cast<double>(epoch) / (opt.epochs - 1) : 0.0;
    const double lr = opt.learning_rate * (opt.final_lr_fraction +
                                           (1.0 - opt.final_lr_fraction) * 0.5 * (1.0 + std::cos(M_PI * progress)));
    Rng shuffle_rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(epoch)));
    std::shuffle(train_idx.begin(), train_idx.end(), shuffle_rng);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n_train; start += opt.batch_size) {
      const std::size_t stop = std::min(start + opt.batch_size, n_train);
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      const auto n_chunks = static_cast<std::ptrdiff_t>((stop - start + opt.chunk_size - 1) / opt.chunk_size);
#pragma omp parallel for schedule(dynamic, 1)
      for (std::ptrdiff_t c = 0; c < n_chunks; ++c) {
        NetworkWeights& cg = chunk_grads[static_cast<std::size_t>(c)];
        zero(cg);
        double loss = 0.0;
        const std::size_t lo = start + static_cast<std::size_t>(c) * opt.chunk_size;
        const std::size_t hi = std::min(lo + opt.chunk_size, stop);
        for (std::size_t k = lo; k < hi; ++k) {
          const TrainingTask& t = data.tasks[train_idx[k]];
          loss += net.loss_and_gradient(t.set(), t.aux(), t.target, &cg, inv_batch);
        }
        chunk_loss[static_cast<std::size_t>(c)] = loss;
      }
      zero(grad);
      double batch_loss = 0.0;
      for (std::ptrdiff_t c = 0; c < n_chunks; ++c) {
        add_into(grad, chunk_grads[static_cast<std::size_t>(c)]);
        batch_loss += chunk_loss[static_cast<std::size_t>(c)];
      }
      const double norm = grad_norm(grad);
      if (!std::isfinite(batch_loss) || !std::isfinite(norm)) {
        fail(ErrorKind::kTraining, "training diverged at epoch " + std::to_string(epoch) + ", batch starting at " +
                                       std::to_string(start) + ": loss " + std::to_string(batch_loss) +
                                       ", gradient norm " + std::to_string(norm));
      }
      if (opt.clip_norm > 0.0 && norm > opt.clip_norm) scale(grad, opt.clip_norm / norm);
      adam.apply(net.mutable_weights(), grad, opt, lr);
      net.refresh();
      epoch_loss += batch_loss;
    }

    EpochStats stats{epoch, epoch_loss / static_cast<double>(n_train), mean_loss(net, data.tasks, val_idx), lr};
    require(std::isfinite(stats.validation_kl), ErrorKind::kTraining,
            "validation KL is not finite at epoch " + std::to_string(epoch));
    out.report.epochs.push_back(stats);
    if (opt.verbose) {
      std::fprintf(stderr, "epoch %3d  lr %.2e  train KL %.5f  val KL %.5f\n", epoch, lr, stats.train_loss,
                   stats.validation_kl);
    }
    if (on_epoch) on_epoch(stats);
    if (stats.validation_kl < out.report.best_validation_kl) {
      out.report.best_validation_kl = stats.validation_kl;
      out.report.best_epoch = epoch;
      out.weights = net.weights();
      since_best = 0;
    } else if (++since_best >= opt.patience) {
      break;
    }
  }
  out.weights.meta.epochs = static_cast<int>(out.report.epochs.size());
  out.weights.meta.final_loss = out.report.epochs.empty() ? out.report.initial_train_loss
                                                          : out.report.epochs.back().train_loss;
  out.weights.meta.validation_kl = out.report.best_validation_kl;
  return out;
}

}  // namespace photoread
