#include "photoread/count_model.hpp"

#include <algorithm>
#include <cmath>
#include <math.h>
#include <random>

#include "photoread/error.hpp"
#include "photoread/rng.hpp"

namespace photoread {
namespace {

// lgamma() writes the global signgam; the reentrant form keeps pmf evaluation thread-safe.
double log_gamma(double x) {
  int sign = 0;
  return ::lgamma_r(x, &sign);
}

std::string describe(const SuperPoissonParams& p) {
  return "(alpha=" + std::to_string(p.alpha) + ", beta=" + std::to_string(p.beta) + ")";
}

}  // namespace

void SuperPoissonParams::validate() const {
  require(std::isfinite(alpha) && std::isfinite(beta) && alpha > 0.0 && beta > 0.0,
          ErrorKind::kDomain, "super-Poisson parameters must be finite and positive, got " + describe(*this));
}

SuperPoissonParams SuperPoissonParams::from_moments(double mean, double variance) {
  require(std::isfinite(mean) && std::isfinite(variance) && mean > 0.0 && variance > mean,
          ErrorKind::kDomain, "moments must satisfy 0 < mean < variance");
  const double beta = mean / (variance - mean);
  return {mean * beta, beta};
}

void MixtureModel::validate() const {
  g.validate();
  f.validate();
  require(std::isfinite(l) && l >= 0.0 && l <= 1.0, ErrorKind::kDomain,
          "occupation l must lie in [0,1], got " + std::to_string(l));
}

void ShotRecord::validate() const {
  require(!counts.empty(), ErrorKind::kDomain, "shot record '" + roi_id + "' is empty");
  for (Count n : counts) {
    require(n >= 0, ErrorKind::kDomain, "shot record '" + roi_id + "' has a negative count");
  }
}

CountHistogram CountHistogram::from_counts(std::span<const Count> counts) {
  std::vector<Count> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end());
  CountHistogram hist;
  hist.total = sorted.size();
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    hist.values.push_back(sorted[i]);
    hist.multiplicity.push_back(static_cast<double>(j - i));
    i = j;
  }
  return hist;
}

double log_pmf(const SuperPoissonParams& p, Count n) {
  p.validate();
  require(n >= 0, ErrorKind::kDomain, "photon count must be non-negative");
  const double x = static_cast<double>(n);
  // NB(r = alpha, success prob q = beta/(1+beta)):
  // Gamma(n+a)/(Gamma(a) n!) q^a (1-q)^n
  return log_gamma(x + p.alpha) - log_gamma(p.alpha) - log_gamma(x + 1.0) +
         p.alpha * (std::log(p.beta) - std::log1p(p.beta)) - x * std::log1p(p.beta);
}

double pmf(const SuperPoissonParams& p, Count n) { return std::exp(log_pmf(p, n)); }

double mixture_pmf(const MixtureModel& model, Count n) {
  model.validate();
  return (1.0 - model.l) * pmf(model.g, n) + model.l * pmf(model.f, n);
}

Count support_limit(const SuperPoissonParams& p, double tail) {
  p.validate();
  require(tail > 0.0 && tail < 1.0, ErrorKind::kDomain, "tail mass must lie in (0,1)");
  double cumulative = 0.0;
  Count n = 0;
  // Past the mode the terms decrease, so a vanishing term with cumulative short of
  // the target only happens through rounding; the mean bound stops that case.
  const double mean = p.mean();
  const double sd = std::sqrt(p.variance());
  for (;; ++n) {
    cumulative += pmf(p, n);
    if (cumulative >= 1.0 - tail) return n;
    if (static_cast<double>(n) > mean + 60.0 * sd + 100.0) return n;
  }
}

double overlap(const SuperPoissonParams& f, const SuperPoissonParams& g) {
  const Count n_max = std::max(support_limit(f), support_limit(g));
  double sum = 0.0;
  for (Count n = 0; n <= n_max; ++n) {
    sum += std::exp(0.5 * (log_pmf(f, n) + log_pmf(g, n)));
  }
  return std::clamp(sum, 0.0, 1.0);
}

namespace {

Count draw_count(const SuperPoissonParams& p, Rng& rng) {
  std::gamma_distribution<double> rate(p.alpha, 1.0 / p.beta);
  const double lambda = rate(rng);
  if (!(lambda > 0.0)) return 0;
  std::poisson_distribution<Count> counts(lambda);
  return counts(rng);
}

}  // namespace

ShotRecord sample(const MixtureModel& model, std::size_t n_shots, std::uint64_t seed) {
  model.validate();
  require(n_shots >= 1, ErrorKind::kDomain, "sample requires at least one shot");
  Rng rng(seed);
  std::bernoulli_distribution bright(model.l);
  ShotRecord record;
  record.counts.reserve(n_shots);
  for (std::size_t i = 0; i < n_shots; ++i) {
    record.counts.push_back(draw_count(bright(rng) ? model.f : model.g, rng));
  }
  return record;
}

std::vector<Count> sample_state(const SuperPoissonParams& p, std::size_t n_shots, std::uint64_t seed) {
  p.validate();
  require(n_shots >= 1, ErrorKind::kDomain, "sample requires at least one shot");
  Rng rng(seed);
  std::vector<Count> out;
  out.reserve(n_shots);
  for (std::size_t i = 0; i < n_shots; ++i) out.push_back(draw_count(p, rng));
  return out;
}

namespace {

MomentFit invert_moments(double mean, double variance) {
  MomentFit fit;
  fit.mean = mean;
  fit.variance = variance;
  if (mean < kMinFitMean) {
    mean = kMinFitMean;
    fit.floored = true;
  }
  if (variance <= mean * (1.0 + kMomentFloor)) {
    fit.params = {mean * kFloorBeta, kFloorBeta};
    fit.floored = true;
  } else {
    const double beta = mean / (variance - mean);
    fit.params = {mean * beta, beta};
  }
  return fit;
}

void check_weight(double w) {
  require(std::isfinite(w) && w >= 0.0, ErrorKind::kDomain, "moment weights must be finite and non-negative");
}

}  // namespace

MomentFit fit_moments(std::span<const Count> counts, std::optional<std::span<const double>> weights) {
  require(!counts.empty(), ErrorKind::kDegenerate, "moment fit needs at least one count");
  if (weights) {
    require(weights->size() == counts.size(), ErrorKind::kDomain, "weights and counts differ in length");
  }
  auto weight = [&](std::size_t i) { return weights ? (*weights)[i] : 1.0; };
  double w_sum = 0.0;
  double first = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double w = weight(i);
    check_weight(w);
    require(counts[i] >= 0, ErrorKind::kDomain, "photon count must be non-negative");
    w_sum += w;
    first += w * static_cast<double>(counts[i]);
  }
  require(w_sum > 0.0, ErrorKind::kDegenerate, "moment weights sum to zero");
  const double mean = first / w_sum;
  double second = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double d = static_cast<double>(counts[i]) - mean;
    second += weight(i) * d * d;
  }
  return invert_moments(mean, second / w_sum);
}

MomentFit fit_moments(const CountHistogram& hist, std::span<const double> value_weights) {
  require(value_weights.size() == hist.unique(), ErrorKind::kDomain, "weights and histogram differ in length");
  require(hist.unique() > 0, ErrorKind::kDegenerate, "moment fit needs at least one count");
  double w_sum = 0.0;
  double first = 0.0;
  for (std::size_t u = 0; u < hist.unique(); ++u) {
    check_weight(value_weights[u]);
    const double w = value_weights[u] * hist.multiplicity[u];
    w_sum += w;
    first += w * static_cast<double>(hist.values[u]);
  }
  require(w_sum > 0.0, ErrorKind::kDegenerate, "moment weights sum to zero");
  const double mean = first / w_sum;
  double second = 0.0;
  for (std::size_t u = 0; u < hist.unique(); ++u) {
    const double d = static_cast<double>(hist.values[u]) - mean;
    second += value_weights[u] * hist.multiplicity[u] * d * d;
  }
  return invert_moments(mean, second / w_sum);
}

Count bin_count(double analog) {
  require(std::isfinite(analog) && analog > -0.5, ErrorKind::kDomain, "analog count must be finite and non-negative");
  return static_cast<Count>(std::nearbyint(analog));  // default FE_TONEAREST: half to even
}

}  // namespace photoread
