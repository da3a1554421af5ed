#pragma once

#include <span>

#include "photoread/count_model.hpp"

namespace photoread {

/// A shot is classified bright when its count exceeds n_th.
struct ThresholdSpec {
  Count n_th = 0;
  double dark_above = 0.0;    // P_g(n > n_th)
  double bright_below = 0.0;  // P_f(n <= n_th)

  double total_error() const { return dark_above + bright_below; }
};

/// Misclassification of both states for threshold t.
ThresholdSpec threshold_errors(const SuperPoissonParams& g, const SuperPoissonParams& f, Count t);

/// Integer t minimising P_g(n > t) + P_f(n <= t); ties resolve to the smaller t.
ThresholdSpec choose_threshold(const SuperPoissonParams& g, const SuperPoissonParams& f);

/// Raw bright-event frequency |{i : n_i > n_th}| / N, no readout-error correction.
double estimate_threshold(std::span<const Count> counts, const ThresholdSpec& spec);

inline double estimate_threshold(const ShotRecord& shots, const ThresholdSpec& spec) {
  return estimate_threshold(std::span<const Count>(shots.counts), spec);
}

}  // namespace photoread
