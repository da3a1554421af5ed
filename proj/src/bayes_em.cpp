#include "photoread/bayes_em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "photoread/error.hpp"

namespace photoread {

void EmConfig::validate() const {
  require(max_iter >= 1, ErrorKind::kConfig, "max_iter must be at least 1");
  require(tol_theta > 0.0 && tol_mean > 0.0, ErrorKind::kConfig, "EM tolerances must be positive");
  require(grid_size >= 2, ErrorKind::kConfig, "grid size must be at least 2");
  if (init_f) init_f->validate();
}

SuperPoissonParams default_init_f(std::span<const Count> counts) {
  require(!counts.empty(), ErrorKind::kDomain, "cannot initialise from an empty shot record");
  std::vector<Count> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 == 1 ? static_cast<double>(sorted[n / 2])
                                   : 0.5 * static_cast<double>(sorted[n / 2 - 1] + sorted[n / 2]);
  std::vector<Count> upper;
  for (Count c : sorted) {
    if (static_cast<double>(c) > median) upper.push_back(c);
  }
  if (upper.size() < 2) upper = sorted;
  return fit_moments(upper).params;
}

std::vector<double> m_step_weights(const CountHistogram& hist, const SuperPoissonParams& g,
                                   const SuperPoissonParams& f, double mean) {
  std::vector<double> w(hist.unique());
  for (std::size_t u = 0; u < hist.unique(); ++u) {
    const double lg = log_pmf(g, hist.values[u]);
    const double lf = log_pmf(f, hist.values[u]);
    const double top = std::max(lg, lf);
    const double bright = mean * std::exp(lf - top);
    const double total = (1.0 - mean) * std::exp(lg - top) + bright;
    w[u] = total > 0.0 ? std::clamp(bright / total, 0.0, 1.0) : 0.0;
  }
  return w;
}

double relative_change(const SuperPoissonParams& next, const SuperPoissonParams& prev) {
  return std::max(std::abs(next.alpha - prev.alpha) / prev.alpha, std::abs(next.beta - prev.beta) / prev.beta);
}

namespace {

double weight_total(const CountHistogram& hist, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t u = 0; u < hist.unique(); ++u) s += w[u] * hist.multiplicity[u];
  return s;
}

}  // namespace

EmResult run_em_loop(const CountHistogram& hist, const SuperPoissonParams& g, const EmConfig& config,
                     const EStep& e_step) {
  config.validate();
  g.validate();
  require(hist.total > 0, ErrorKind::kDomain, "EM needs a non-empty shot record");
  require(config.init_f.has_value(), ErrorKind::kConfig, "EM loop needs an initial bright law");

  EmResult result;
  SuperPoissonParams theta = *config.init_f;
  double previous_mean = std::numeric_limits<double>::quiet_NaN();

  auto record = [&](const PosteriorGrid& post, double weight_sum, bool floor) {
    EmIterate it{theta, post.mean, post.sd, weight_sum, floor, std::nullopt};
    if (config.keep_snapshots) it.snapshot = post;
    result.trace.iterations.push_back(std::move(it));
  };

  if (config.freeze_theta) {
    result.posterior = e_step(theta);
    record(result.posterior, 0.0, false);
    result.theta_f = theta;
    result.trace.converged = true;
    return result;
  }

  for (int m = 1; m <= config.max_iter; ++m) {
    PosteriorGrid post = e_step(theta);
    const std::vector<double> w = m_step_weights(hist, g, theta, post.mean);
    const double w_sum = weight_total(hist, w);
    if (w_sum < kBrightWeightFloor) {
      record(post, w_sum, false);
      result.trace.degenerate_bright = true;
      result.trace.iterations_used = m - 1;
      result.posterior = std::move(post);
      result.theta_f = theta;
      return result;
    }
    const MomentFit fit = fit_moments(hist, w);
    record(post, w_sum, fit.floored);
    if (overlap(fit.params, g) >= kMaxBrightOverlap) {
      result.trace.degenerate_bright = true;
      result.trace.iterations_used = m;
      result.posterior = std::move(post);
      result.theta_f = theta;
      return result;
    }
    const bool converged = m >= 2 && relative_change(fit.params, theta) < config.tol_theta &&
                           std::abs(post.mean - previous_mean) < config.tol_mean;
    theta = fit.params;
    previous_mean = post.mean;
    result.trace.iterations_used = m;
    if (converged) {
      result.trace.converged = true;
      break;
    }
  }
  result.posterior = e_step(theta);
  result.theta_f = theta;
  return result;
}

EmResult run_em(const ShotRecord& shots, const SuperPoissonParams& g, const PriorSpec& prior,
                const EmConfig& config) {
  require(config.e_step_engine == EStepEngine::kExact, ErrorKind::kConfig,
          "the network E-step needs trained weights; use run_em_network");
  shots.validate();
  const CountHistogram hist = CountHistogram::from_counts(shots.counts);
  EmConfig cfg = config;
  if (!cfg.init_f) cfg.init_f = default_init_f(shots.counts);
  const std::size_t grid = cfg.grid_size;
  return run_em_loop(hist, g, cfg, [&](const SuperPoissonParams& f) {
    return compute_posterior(hist, g, f, prior, grid);
  });
}

PosteriorGrid run_anchored(const ShotRecord& shots, const SuperPoissonParams& g, const SuperPoissonParams& f,
                           const PriorSpec& prior, std::size_t grid_size) {
  return compute_posterior(shots, g, f, prior, grid_size);
}

SuperPoissonParams reapply_m_step(const ShotRecord& shots, const SuperPoissonParams& g, const EmResult& result) {
  const CountHistogram hist = CountHistogram::from_counts(shots.counts);
  const std::vector<double> w = m_step_weights(hist, g, result.theta_f, result.posterior.mean);
  return fit_moments(hist, w).params;
}

SharedEmResult run_shared_em_loop(std::span<const CountHistogram> hists, const SuperPoissonParams& g,
                                  const EmConfig& config, const IndexedEStep& e_step) {
  config.validate();
  g.validate();
  require(!hists.empty(), ErrorKind::kDomain, "shared EM needs at least one record");
  require(config.init_f.has_value(), ErrorKind::kConfig, "EM loop needs an initial bright law");
  const std::size_t records = hists.size();

  SharedEmResult result;
  SuperPoissonParams theta = *config.init_f;
  std::vector<double> previous_means;

  auto e_all = [&](const SuperPoissonParams& f) {
    std::vector<PosteriorGrid> posts(records);
    for (std::size_t j = 0; j < records; ++j) posts[j] = e_step(j, f);
    return posts;
  };
  auto means_of = [](const std::vector<PosteriorGrid>& posts) {
    std::vector<double> means;
    for (const auto& p : posts) means.push_back(p.mean);
    return means;
  };

  if (config.freeze_theta) {
    result.posteriors = e_all(theta);
    result.trace.theta_f.push_back(theta);
    result.trace.means.push_back(means_of(result.posteriors));
    result.theta_f = theta;
    result.trace.converged = true;
    return result;
  }

  for (int m = 1; m <= config.max_iter; ++m) {
    std::vector<PosteriorGrid> posts = e_all(theta);
    std::vector<double> means = means_of(posts);
    result.trace.theta_f.push_back(theta);
    result.trace.means.push_back(means);

    // Pool (value, weight * multiplicity) over records in record order.
    std::vector<Count> values;
    std::vector<double> weights;
    for (std::size_t j = 0; j < records; ++j) {
      const std::vector<double> w = m_step_weights(hists[j], g, theta, means[j]);
      for (std::size_t u = 0; u < hists[j].unique(); ++u) {
        values.push_back(hists[j].values[u]);
        weights.push_back(w[u] * hists[j].multiplicity[u]);
      }
    }
    double w_sum = 0.0;
    for (double w : weights) w_sum += w;
    if (w_sum < kBrightWeightFloor) {
      result.trace.degenerate_bright = true;
      result.trace.iterations_used = m - 1;
      result.posteriors = std::move(posts);
      result.theta_f = theta;
      return result;
    }
    const SuperPoissonParams next = fit_moments(values, std::span<const double>(weights)).params;
    if (overlap(next, g) >= kMaxBrightOverlap) {
      result.trace.degenerate_bright = true;
      result.trace.iterations_used = m;
      result.posteriors = std::move(posts);
      result.theta_f = theta;
      return result;
    }
    double mean_change = 0.0;
    if (!previous_means.empty()) {
      for (std::size_t j = 0; j < records; ++j) {
        mean_change = std::max(mean_change, std::abs(means[j] - previous_means[j]));
      }
    }
    const bool converged = m >= 2 && relative_change(next, theta) < config.tol_theta && mean_change < config.tol_mean;
    theta = next;
    previous_means = std::move(means);
    result.trace.iterations_used = m;
    if (converged) {
      result.trace.converged = true;
      break;
    }
  }
  result.posteriors = e_all(theta);
  result.theta_f = theta;
  return result;
}

SharedEmResult run_shared_em(std::span<const ShotRecord> records, const SuperPoissonParams& g,
                             const PriorSpec& prior, const EmConfig& config) {
  require(config.e_step_engine == EStepEngine::kExact, ErrorKind::kConfig,
          "the network E-step needs trained weights; use run_shared_em_network");
  std::vector<CountHistogram> hists;
  std::vector<Count> pooled;
  for (const ShotRecord& r : records) {
    r.validate();
    hists.push_back(CountHistogram::from_counts(r.counts));
    pooled.insert(pooled.end(), r.counts.begin(), r.counts.end());
  }
  EmConfig cfg = config;
  if (!cfg.init_f) cfg.init_f = default_init_f(pooled);
  const std::size_t grid = cfg.grid_size;
  return run_shared_em_loop(hists, g, cfg, [&](std::size_t j, const SuperPoissonParams& f) {
    return compute_posterior(hists[j], g, f, prior, grid);
  });
}

}  // namespace photoread
