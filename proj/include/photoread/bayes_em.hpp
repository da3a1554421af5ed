#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "photoread/count_model.hpp"
#include "photoread/posterior_grid.hpp"

namespace photoread {

enum class EStepEngine { kExact, kNetwork };

struct EmConfig {
  int max_iter = 50;
  double tol_theta = 1e-4;  // relative change of alpha_f and beta_f
  double tol_mean = 1e-5;   // absolute change of the posterior mean
  std::optional<SuperPoissonParams> init_f;  // default: moment fit above the median
  std::size_t grid_size = kDefaultGridSize;
  EStepEngine e_step_engine = EStepEngine::kExact;
  /// Skip every M-step: a single E-step with init_f (the strongly anchored case).
  bool freeze_theta = false;
  bool keep_snapshots = false;

  void validate() const;
};

struct EmIterate {
  SuperPoissonParams theta_f;  // parameters used by this E-step
  double mean = 0.0;
  double sd = 0.0;
  double weight_sum = 0.0;     // sum of M-step weights (0 when no M-step ran)
  bool moment_floor = false;
  std::optional<PosteriorGrid> snapshot;
};

struct EmTrace {
  std::vector<EmIterate> iterations;
  bool converged = false;
  int iterations_used = 0;  // number of M-steps taken
  bool degenerate_bright = false;
};

struct EmResult {
  PosteriorGrid posterior;
  SuperPoissonParams theta_f;
  EmTrace trace;
};

/// Below this total M-step weight the bright law is frozen and the result flagged.
inline constexpr double kBrightWeightFloor = 0.5;
/// An M-step update whose overlap with g reaches this value is rejected; the bright law is
/// frozen at the previous iterate and the result flagged as degenerate.
inline constexpr double kMaxBrightOverlap = 0.9;

/// E-step callback: posterior over l for the given bright-state parameters.
using EStep = std::function<PosteriorGrid(const SuperPoissonParams& theta_f)>;

/// Moment fit to the counts strictly above the empirical median (all counts if fewer than two).
SuperPoissonParams default_init_f(std::span<const Count> counts);

/// w = l f(n) / [(1-l) g(n) + l f(n)] per distinct count of the histogram.
std::vector<double> m_step_weights(const CountHistogram& hist, const SuperPoissonParams& g,
                                   const SuperPoissonParams& f, double mean);

/// The EM loop with an arbitrary E-step engine; the M-step is always the weighted moment fit.
EmResult run_em_loop(const CountHistogram& hist, const SuperPoissonParams& g, const EmConfig& config,
                     const EStep& e_step);

/// Weakly-anchored Bayesian-EM with the exact grid E-step. Only g is calibrated.
EmResult run_em(const ShotRecord& shots, const SuperPoissonParams& g, const PriorSpec& prior = PriorSpec::uniform(),
                const EmConfig& config = {});

/// Strongly anchored: both laws calibrated, one posterior evaluation.
PosteriorGrid run_anchored(const ShotRecord& shots, const SuperPoissonParams& g, const SuperPoissonParams& f,
                           const PriorSpec& prior = PriorSpec::uniform(), std::size_t grid_size = kDefaultGridSize);

/// Re-applies one M-step at the returned (posterior mean, theta_f); used to check the fixed point.
SuperPoissonParams reapply_m_step(const ShotRecord& shots, const SuperPoissonParams& g, const EmResult& result);

/// Relative change max(|da|/a, |db|/b).
double relative_change(const SuperPoissonParams& next, const SuperPoissonParams& prev);

// --- shared bright law across records ---------------------------------------

/// Records taken at one exposure share f; each keeps its own occupation.
struct SharedEmTrace {
  std::vector<SuperPoissonParams> theta_f;  // per iteration
  std::vector<std::vector<double>> means;   // per iteration, per record
  bool converged = false;
  int iterations_used = 0;
  bool degenerate_bright = false;
};

struct SharedEmResult {
  std::vector<PosteriorGrid> posteriors;
  SuperPoissonParams theta_f;
  SharedEmTrace trace;
};

using IndexedEStep = std::function<PosteriorGrid(std::size_t record, const SuperPoissonParams& theta_f)>;

SharedEmResult run_shared_em_loop(std::span<const CountHistogram> hists, const SuperPoissonParams& g,
                                  const EmConfig& config, const IndexedEStep& e_step);

/// E-step per record, pooled M-step over all records' weighted counts.
SharedEmResult run_shared_em(std::span<const ShotRecord> records, const SuperPoissonParams& g,
                             const PriorSpec& prior = PriorSpec::uniform(), const EmConfig& config = {});

}  // namespace photoread
