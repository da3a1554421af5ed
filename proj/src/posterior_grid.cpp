#include "photoread/posterior_grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "photoread/error.hpp"
#include "photoread/posterior_kernels.hpp"

namespace photoread {

PriorSpec PriorSpec::grid_valued(std::vector<double> masses) {
  require(masses.size() >= 2, ErrorKind::kDomain, "grid-valued prior needs at least two nodes");
  double sum = 0.0;
  for (double m : masses) {
    require(std::isfinite(m) && m >= 0.0, ErrorKind::kDomain, "prior masses must be finite and non-negative");
    sum += m;
  }
  require(std::abs(sum - 1.0) <= kMassTolerance, ErrorKind::kDomain, "prior masses must sum to 1");
  PriorSpec prior;
  prior.kind = Kind::kGridValued;
  prior.masses = std::move(masses);
  return prior;
}

std::vector<double> PriorSpec::log_masses(std::size_t grid_size) const {
  if (kind == Kind::kUniform) return std::vector<double>(grid_size, 0.0);
  require(masses.size() == grid_size, ErrorKind::kDomain,
          "prior has " + std::to_string(masses.size()) + " nodes but the grid has " + std::to_string(grid_size));
  std::vector<double> out(grid_size);
  std::transform(masses.begin(), masses.end(), out.begin(), [](double m) { return std::log(m); });
  return out;
}

std::vector<double> grid_nodes(std::size_t grid_size) {
  require(grid_size >= 2, ErrorKind::kDomain, "grid needs at least two nodes");
  std::vector<double> nodes(grid_size);
  const double last = static_cast<double>(grid_size - 1);
  for (std::size_t k = 0; k < grid_size; ++k) nodes[k] = static_cast<double>(k) / last;
  return nodes;
}

std::pair<double, double> posterior_moments(const PosteriorGrid& grid) {
  require(grid.nodes.size() == grid.masses.size() && !grid.nodes.empty(), ErrorKind::kInvariant,
          "posterior nodes and masses differ in length");
  double sum = 0.0;
  double first = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    require(grid.masses[k] >= 0.0, ErrorKind::kInvariant, "posterior has a negative mass");
    sum += grid.masses[k];
    first += grid.masses[k] * grid.nodes[k];
  }
  require(std::abs(sum - 1.0) <= kMassTolerance, ErrorKind::kInvariant, "posterior masses are not normalised");
  const double mean = std::clamp(first, 0.0, 1.0);
  double second = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double d = grid.nodes[k] - mean;
    second += grid.masses[k] * d * d;
  }
  return {mean, std::sqrt(second)};
}

PosteriorGrid normalise_log_weights(std::vector<double> nodes, std::span<const double> log_weights) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double w : log_weights) {
    require(!std::isnan(w) && w != std::numeric_limits<double>::infinity(), ErrorKind::kNumerical,
            "log-likelihood is not finite");
    peak = std::max(peak, w);
  }
  require(std::isfinite(peak), ErrorKind::kNumerical, "log-likelihood is -inf at every grid node");
  PosteriorGrid grid;
  grid.masses.resize(log_weights.size());
  double total = 0.0;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    grid.masses[k] = std::exp(log_weights[k] - peak);
    total += grid.masses[k];
  }
  for (double& m : grid.masses) m /= total;
  grid.nodes = std::move(nodes);
  std::tie(grid.mean, grid.sd) = posterior_moments(grid);
  return grid;
}

PosteriorGrid compute_posterior(const CountHistogram& hist, const SuperPoissonParams& g,
                                const SuperPoissonParams& f, const PriorSpec& prior, std::size_t grid_size) {
  g.validate();
  f.validate();
  std::vector<double> nodes = grid_nodes(grid_size);
  std::vector<double> log_weights = prior.log_masses(grid_size);

  std::vector<kernels::MixtureTerm> terms;
  terms.reserve(hist.unique());
  for (Count n : hist.values) terms.push_back(kernels::make_term(log_pmf(g, n), log_pmf(f, n)));

  std::vector<double> log_likelihood(grid_size);
  kernels::log_likelihood_histogram(terms, hist.multiplicity, nodes, log_likelihood);
  for (std::size_t k = 0; k < grid_size; ++k) log_weights[k] += log_likelihood[k];
  return normalise_log_weights(std::move(nodes), log_weights);
}

PosteriorGrid compute_posterior(std::span<const Count> counts, const SuperPoissonParams& g,
                                const SuperPoissonParams& f, const PriorSpec& prior, std::size_t grid_size) {
  for (Count n : counts) require(n >= 0, ErrorKind::kDomain, "photon count must be non-negative");
  return compute_posterior(CountHistogram::from_counts(counts), g, f, prior, grid_size);
}

}  // namespace photoread
