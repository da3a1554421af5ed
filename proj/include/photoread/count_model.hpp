#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace photoread {

using Count = std::int64_t;

/// Over-dispersed single-state photon-count law (Gamma-Poisson, i.e. negative
/// binomial with real shape). Mean alpha/beta, variance alpha(1+beta)/beta^2.
struct SuperPoissonParams {
  double alpha = 1.0;  // shape
  double beta = 1.0;   // inverse scale

  double mean() const { return alpha / beta; }
  double variance() const { return alpha * (1.0 + beta) / (beta * beta); }

  /// Throws ErrorKind::kDomain unless both fields are finite and positive.
  void validate() const;

  static SuperPoissonParams from_moments(double mean, double variance);

  friend bool operator==(const SuperPoissonParams&, const SuperPoissonParams&) = default;
};

/// Two-state mixture P(n|l) = (1-l) g(n) + l f(n); g is the dark anchor.
struct MixtureModel {
  SuperPoissonParams g;
  SuperPoissonParams f;
  double l = 0.0;

  void validate() const;
};

/// Per-shot ROI photon counts for one preparation setting.
struct ShotRecord {
  std::vector<Count> counts;
  std::string roi_id = "roi0";
  std::string exposure_tag;

  std::size_t size() const { return counts.size(); }
  bool empty() const { return counts.empty(); }

  /// Throws ErrorKind::kDomain when empty or when a count is negative.
  void validate() const;
};

/// Distinct counts in ascending order with their multiplicities.
struct CountHistogram {
  std::vector<Count> values;
  std::vector<double> multiplicity;
  std::size_t total = 0;

  static CountHistogram from_counts(std::span<const Count> counts);
  std::size_t unique() const { return values.size(); }
};

/// Tail mass left beyond the truncated support of a single-state law.
inline constexpr double kSupportTail = 1e-10;

double log_pmf(const SuperPoissonParams& p, Count n);
double pmf(const SuperPoissonParams& p, Count n);
double mixture_pmf(const MixtureModel& model, Count n);

/// Smallest n_max with cumulative mass >= 1 - tail.
Count support_limit(const SuperPoissonParams& p, double tail = kSupportTail);

/// Bhattacharyya coefficient sum_n sqrt(f(n) g(n)) over the joint truncated support.
double overlap(const SuperPoissonParams& f, const SuperPoissonParams& g);

/// Synthetic shots: Bernoulli(l) state choice, then Gamma rate, then Poisson count.
ShotRecord sample(const MixtureModel& model, std::size_t n_shots, std::uint64_t seed);

/// Draws from a single-state law (used for calibration histograms).
std::vector<Count> sample_state(const SuperPoissonParams& p, std::size_t n_shots, std::uint64_t seed);

struct MomentFit {
  SuperPoissonParams params;
  double mean = 0.0;
  double variance = 0.0;
  bool floored = false;  // variance did not exceed the mean; near-Poisson floor applied
};

/// Variance must exceed mean * (1 + kMomentFloor) for a regular inversion.
inline constexpr double kMomentFloor = 1e-3;
/// Inverse scale used when the near-Poisson floor triggers.
inline constexpr double kFloorBeta = 1e3;
/// Smallest mean accepted by the inversion; lower means are raised to it and flagged.
inline constexpr double kMinFitMean = 1e-6;

/// Weighted moment estimate: beta = m/(v-m), alpha = m*beta.
MomentFit fit_moments(std::span<const Count> counts,
                      std::optional<std::span<const double>> weights = std::nullopt);

/// Same estimate over a histogram; weights are per distinct value (multiplicity applied inside).
MomentFit fit_moments(const CountHistogram& hist, std::span<const double> value_weights);

/// Integer binning of analog counts: round half to even, negatives rejected.
Count bin_count(double analog);

}  // namespace photoread
