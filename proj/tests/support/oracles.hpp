#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "photoread/count_model.hpp"

namespace oracle {

/// Gamma-Poisson pmf in long double straight from the closed form.
inline long double pmf(const photoread::SuperPoissonParams& p, long long n) {
  const long double a = p.alpha, b = p.beta;
  return std::exp(std::lgamma(n + a) - std::lgamma(a) - std::lgamma(n + 1.0L) + a * std::log(b / (1.0L + b)) -
                  n * std::log(1.0L + b));
}

/// Posterior mean and sd on a uniform L-node grid by the direct product of mixture pmfs.
inline std::pair<long double, long double> direct_posterior(std::span<const photoread::Count> counts,
                                                            const photoread::SuperPoissonParams& g,
                                                            const photoread::SuperPoissonParams& f, int L) {
  std::vector<long double> pg, pf;
  for (photoread::Count n : counts) {
    pg.push_back(pmf(g, n));
    pf.push_back(pmf(f, n));
  }
  std::vector<long double> w(L);
  long double total = 0;
  for (int k = 0; k < L; ++k) {
    const long double l = static_cast<long double>(k) / (L - 1);
    long double prod = 1;
    for (std::size_t i = 0; i < pg.size(); ++i) prod *= (1 - l) * pg[i] + l * pf[i];
    w[k] = prod;
    total += prod;
  }
  long double mean = 0;
  for (int k = 0; k < L; ++k) mean += w[k] / total * (static_cast<long double>(k) / (L - 1));
  long double var = 0;
  for (int k = 0; k < L; ++k) {
    const long double d = static_cast<long double>(k) / (L - 1) - mean;
    var += w[k] / total * d * d;
  }
  return {mean, std::sqrt(var)};
}

}  // namespace oracle
