#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "photoread/count_model.hpp"

namespace photoread {

inline constexpr std::size_t kDefaultGridSize = 1001;
/// Tolerance on sum(masses) = 1 for a grid posterior or prior.
inline constexpr double kMassTolerance = 1e-9;

/// Discretised posterior over the occupation l on uniformly spaced nodes in [0,1].
struct PosteriorGrid {
  std::vector<double> nodes;
  std::vector<double> masses;
  double mean = 0.0;
  double sd = 0.0;

  std::size_t size() const { return nodes.size(); }
};

struct PriorSpec {
  enum class Kind { kUniform, kGridValued };
  Kind kind = Kind::kUniform;
  std::vector<double> masses;  // only for kGridValued

  static PriorSpec uniform() { return {}; }
  /// Validates non-negativity and unit sum.
  static PriorSpec grid_valued(std::vector<double> masses);

  /// Log prior mass at each of `grid_size` nodes (uniform: equal weights).
  std::vector<double> log_masses(std::size_t grid_size) const;
};

/// L nodes k/(L-1), endpoints included.
std::vector<double> grid_nodes(std::size_t grid_size);

/// Exact posterior over l: log-space accumulation of sum_i log P(n_i|l_k) plus log prior,
/// normalised by log-sum-exp. Throws kNumerical when no node has finite log-likelihood.
PosteriorGrid compute_posterior(std::span<const Count> counts, const SuperPoissonParams& g,
                                const SuperPoissonParams& f, const PriorSpec& prior = PriorSpec::uniform(),
                                std::size_t grid_size = kDefaultGridSize);

inline PosteriorGrid compute_posterior(const ShotRecord& shots, const SuperPoissonParams& g,
                                       const SuperPoissonParams& f, const PriorSpec& prior = PriorSpec::uniform(),
                                       std::size_t grid_size = kDefaultGridSize) {
  return compute_posterior(std::span<const Count>(shots.counts), g, f, prior, grid_size);
}

/// Histogram form used inside EM loops where the histogram is built once.
PosteriorGrid compute_posterior(const CountHistogram& hist, const SuperPoissonParams& g,
                                const SuperPoissonParams& f, const PriorSpec& prior, std::size_t grid_size);

/// Discrete first moment and central second-moment root. Throws kInvariant if not normalised.
std::pair<double, double> posterior_moments(const PosteriorGrid& grid);

/// Turns per-node log weights into a normalised grid with moments (log-sum-exp).
PosteriorGrid normalise_log_weights(std::vector<double> nodes, std::span<const double> log_weights);

}  // namespace photoread
