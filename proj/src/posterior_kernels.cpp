#include "photoread/posterior_kernels.hpp"

#include <algorithm>

#include "photoread/parallel.hpp"

namespace photoread::kernels {

MixtureTerm make_term(double log_g, double log_f) {
  MixtureTerm t;
  t.bright_dominant = log_f > log_g;
  t.base = t.bright_dominant ? log_f : log_g;
  t.ratio = std::exp(t.bright_dominant ? log_g - log_f : log_f - log_g);
  return t;
}

void log_likelihood_reference(std::span<const MixtureTerm> terms, std::span<const double> nodes,
                              std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t grid = nodes.size();
  for (const MixtureTerm& t : terms) {
    const double r = t.ratio;
    const double base = t.base;
    if (t.bright_dominant) {
      for (std::size_t k = 0; k < grid; ++k) {
        const double l = nodes[k];
        out[k] += base + std::log(l + (1.0 - l) * r);
      }
    } else {
      for (std::size_t k = 0; k < grid; ++k) {
        const double l = nodes[k];
        out[k] += base + std::log((1.0 - l) + l * r);
      }
    }
  }
}

void log_likelihood_histogram(std::span<const MixtureTerm> terms, std::span<const double> multiplicity,
                              std::span<const double> nodes, std::span<double> out) {
  const auto grid = static_cast<std::ptrdiff_t>(nodes.size());
  const std::size_t unique = terms.size();
  const MixtureTerm* t = terms.data();
  const double* m = multiplicity.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < grid; ++k) {
    const double l = nodes[static_cast<std::size_t>(k)];
    double acc = 0.0;
    for (std::size_t u = 0; u < unique; ++u) {
      acc += m[u] * term_log_likelihood(t[u], l);
    }
    out[static_cast<std::size_t>(k)] = acc;
  }
}

}  // namespace photoread::kernels
