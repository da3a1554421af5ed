#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "photoread/count_model.hpp"
#include "photoread/pi_network.hpp"

namespace photoread {

/// Sampling ranges for simulated tasks. Shape and inverse scale are log-uniform for both laws,
/// relabelled so that the bright mean exceeds the dark mean; l is uniform; N is log-uniform.
struct TrainingRanges {
  double alpha_min = 0.5;
  double alpha_max = 300.0;
  double beta_min = 0.1;
  double beta_max = 20.0;
  std::size_t n_min = 50;
  std::size_t n_max = 1000;
  /// Share of tasks whose bright law is a small perturbation of the dark one (f close to g).
  double near_anchor_fraction = 0.1;

  void validate() const;
};

/// One teacher-forced example: the set input in collapsed form (distinct s with pooling weights
/// multiplicity / N, ascending count order) and the exact posterior on the network grid.
struct TrainingTask {
  SuperPoissonParams g;
  SuperPoissonParams f;
  double l_true = 0.0;
  std::size_t n_shots = 0;
  std::vector<double> s;
  std::vector<double> weights;
  std::vector<double> target;

  AuxFeatures aux() const { return {static_cast<double>(n_shots), g, f}; }
  WeightedSet set() const { return {s, weights}; }
};

struct TrainingSet {
  TrainingRanges ranges;
  std::size_t grid_size = 201;
  std::uint64_t seed = 0;
  std::vector<TrainingTask> tasks;
};

/// Task k depends only on (seed, k), so sets of different sizes share their prefix.
TrainingTask generate_task(const TrainingRanges& ranges, std::uint64_t seed, std::size_t index,
                           std::size_t grid_size);
TrainingSet generate_training_set(const TrainingRanges& ranges, std::size_t size, std::uint64_t seed,
                                  std::size_t grid_size = 201);

struct OptimizerConfig {
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 50;
  double validation_fraction = 0.1;
  int patience = 10;  // epochs without validation improvement before stopping
  /// Cosine decay of the step size down to learning_rate * final_lr_fraction; 1 disables it.
  double final_lr_fraction = 0.02;
  /// Tasks per gradient chunk; chunk sums are reduced in a fixed order, so results do not
  /// depend on the thread count.
  std::size_t chunk_size = 16;
  double clip_norm = 10.0;  // global gradient-norm clip; <= 0 disables
  bool verbose = false;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_kl = 0.0;  // mean over the validation split
  double learning_rate = 0.0;
};

struct TrainingReport {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
  double best_validation_kl = 0.0;
  double initial_train_loss = 0.0;  // mean KL of the initial weights over the training split
};

struct TrainingOutcome {
  NetworkWeights weights;  // best validation epoch
  TrainingReport report;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mean-KL minimisation with Adam. Throws ErrorKind::kTraining when the loss turns non-finite.
TrainingOutcome train(const TrainingSet& data, const ArchitectureSpec& arch, const OptimizerConfig& opt,
                      std::uint64_t seed, const EpochCallback& on_epoch = {});

/// Aux standardisation from the raw aux vectors of the given tasks.
Standardization fit_standardization(const std::vector<TrainingTask>& tasks, double s_scale = 4.0,
                                    double count_scale = 1.0);

struct KlReport {
  std::size_t tasks = 0;
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  double max = 0.0;
  std::vector<double> per_task;
};

/// KL(exact || network) over every task of the set.
KlReport evaluate(const Network& net, const TrainingSet& data);

/// Linear-interpolated quantile of an unsorted sample, q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace photoread
