#include "photoread/threshold_readout.hpp"

#include <algorithm>
#include <vector>

#include "photoread/error.hpp"

namespace photoread {
namespace {

std::vector<double> cdf_table(const SuperPoissonParams& p, Count n_max) {
  std::vector<double> cdf(static_cast<std::size_t>(n_max) + 1);
  double acc = 0.0;
  for (Count n = 0; n <= n_max; ++n) {
    acc += pmf(p, n);
    cdf[static_cast<std::size_t>(n)] = std::min(acc, 1.0);
  }
  return cdf;
}

}  // namespace

ThresholdSpec threshold_errors(const SuperPoissonParams& g, const SuperPoissonParams& f, Count t) {
  require(t >= 0, ErrorKind::kDomain, "threshold must be non-negative");
  double g_cdf = 0.0;
  double f_cdf = 0.0;
  for (Count n = 0; n <= t; ++n) {
    g_cdf += pmf(g, n);
    f_cdf += pmf(f, n);
  }
  return {t, std::clamp(1.0 - g_cdf, 0.0, 1.0), std::clamp(f_cdf, 0.0, 1.0)};
}

ThresholdSpec choose_threshold(const SuperPoissonParams& g, const SuperPoissonParams& f) {
  const Count n_max = std::max(support_limit(g), support_limit(f));
  const std::vector<double> g_cdf = cdf_table(g, n_max);
  const std::vector<double> f_cdf = cdf_table(f, n_max);
  ThresholdSpec best{0, 1.0 - g_cdf[0], f_cdf[0]};
  for (Count t = 1; t <= n_max; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const ThresholdSpec candidate{t, std::max(0.0, 1.0 - g_cdf[i]), f_cdf[i]};
    // Rounding noise must not break ties away from the smaller threshold.
    if (candidate.total_error() < best.total_error() - 1e-14) best = candidate;
  }
  return best;
}

double estimate_threshold(std::span<const Count> counts, const ThresholdSpec& spec) {
  require(!counts.empty(), ErrorKind::kDomain, "threshold estimate needs at least one shot");
  std::size_t above = 0;
  for (Count n : counts) {
    if (n > spec.n_th) ++above;
  }
  return static_cast<double>(above) / static_cast<double>(counts.size());
}

}  // namespace photoread
