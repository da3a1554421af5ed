#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "photoread/bayes_em.hpp"
#include "photoread/experiments.hpp"
#include "photoread/pi_network.hpp"
#include "photoread/training.hpp"

namespace photoread {

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::kRabi;
  RabiModel rabi{2.0 * 3.14159265358979323846 * 25.1e3, 0.87};
  RamseyModel ramsey;
  std::vector<double> times;  // seconds; empty selects the kind's default grid
};

/// Declarative run configuration (JSON). Every key is optional; unknown keys are rejected.
/// Keys: seed, g {alpha, beta}, f {alpha, beta}, l, n_shots, rois, exposure_tag, experiment,
/// em {max_iter, tol_theta, tol_mean, init_f, shared_bright}, grid, seeds, training {...}, eval {...}.
struct RunConfig {
  std::uint64_t seed = 1;
  std::optional<SuperPoissonParams> g;
  std::optional<SuperPoissonParams> f;
  double l = 0.5;
  std::size_t n_shots = 200;
  std::size_t rois = 1;
  std::string exposure_tag = "sim";
  std::optional<ExperimentSpec> experiment;
  EmConfig em;
  bool shared_bright = true;
  std::size_t grid = kDefaultGridSize;
  std::size_t seeds = 20;  // repetitions for the experiment command

  TrainingRanges ranges;
  std::size_t train_size = 200000;
  OptimizerConfig optimizer;
  ArchitectureSpec arch;
  std::size_t eval_tasks = 2000;
  std::uint64_t eval_seed = 424242;

  nlohmann::json source = nlohmann::json::object();  // as parsed, for echoing into outputs

  /// Single-line JSON of the parsed configuration.
  std::string echo() const;
};

/// Throws ErrorKind::kConfig naming the offending field, or the line and column for syntax errors.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace photoread
