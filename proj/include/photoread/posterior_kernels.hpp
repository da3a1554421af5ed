#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "photoread/count_model.hpp"

namespace photoread::kernels {

/// Per-observation mixture factors. log[(1-l) g + l f] = base + log(a(l) + b(l) * ratio)
/// with the larger of the two pmfs factored out so that ratio <= 1.
struct MixtureTerm {
  double base = 0.0;     // max(log g, log f)
  double ratio = 0.0;    // exp(min - max), in [0,1]
  bool bright_dominant = false;  // log f > log g
};

MixtureTerm make_term(double log_g, double log_f);

/// log[(1-l) g + l f] for one term; exact at the endpoints.
inline double term_log_likelihood(const MixtureTerm& t, double l);

/// Serial reference: loops shot by shot, accumulating every node. O(N * L).
/// `terms` is indexed per shot. Summation follows shot order.
void log_likelihood_reference(std::span<const MixtureTerm> terms, std::span<const double> nodes,
                              std::span<double> out);

/// Production kernel over distinct counts with multiplicities; OpenMP-parallel over nodes.
/// Each node sums terms in ascending-count order, so results do not depend on the thread count.
void log_likelihood_histogram(std::span<const MixtureTerm> terms, std::span<const double> multiplicity,
                              std::span<const double> nodes, std::span<double> out);

// ---------------------------------------------------------------------------

inline double term_log_likelihood(const MixtureTerm& t, double l) {
  // Dark-dominant: (1-l) + l*ratio. Bright-dominant: l + (1-l)*ratio.
  const double inner = t.bright_dominant ? l + (1.0 - l) * t.ratio : (1.0 - l) + l * t.ratio;
  return t.base + std::log(inner);
}

}  // namespace photoread::kernels
