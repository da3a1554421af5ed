#include "photoread/network_em.hpp"

#include "photoread/error.hpp"

namespace photoread {
namespace {

PosteriorGrid with_prior(const Network& net, std::vector<double> logits, const PriorSpec& prior) {
  const std::size_t L = net.arch().grid_size;
  if (prior.kind == PriorSpec::Kind::kGridValued) {
    const std::vector<double> lp = prior.log_masses(L);
    for (std::size_t k = 0; k < L; ++k) logits[k] += lp[k];
  }
  return normalise_log_weights(grid_nodes(L), logits);
}

const Network& need(const Network* net) {
  require(net != nullptr, ErrorKind::kConfig, "network E-step requested but no trained weights were loaded");
  return *net;
}

}  // namespace

PosteriorGrid network_posterior(const Network& net, const CountHistogram& hist, const SuperPoissonParams& g,
                                const SuperPoissonParams& f, const PriorSpec& prior) {
  require(hist.total > 0, ErrorKind::kDomain, "network posterior needs at least one shot");
  std::vector<double> s;
  s.reserve(hist.total);
  for (std::size_t u = 0; u < hist.unique(); ++u) {
    const double v = log_pmf(f, hist.values[u]) - log_pmf(g, hist.values[u]);
    s.insert(s.end(), static_cast<std::size_t>(hist.multiplicity[u]), v);
  }
  const AuxFeatures aux{static_cast<double>(hist.total), g, f};
  return with_prior(net, net.logits(WeightedSet{s, {}}, aux), prior);
}

PosteriorGrid network_posterior_collapsed(const Network& net, const CountHistogram& hist,
                                          const SuperPoissonParams& g, const SuperPoissonParams& f,
                                          const PriorSpec& prior) {
  require(hist.total > 0, ErrorKind::kDomain, "network posterior needs at least one shot");
  std::vector<double> s(hist.unique()), w(hist.unique());
  const double n = static_cast<double>(hist.total);
  for (std::size_t u = 0; u < hist.unique(); ++u) {
    s[u] = log_pmf(f, hist.values[u]) - log_pmf(g, hist.values[u]);
    w[u] = hist.multiplicity[u] / n;
  }
  const AuxFeatures aux{n, g, f};
  return with_prior(net, net.logits(WeightedSet{s, w}, aux), prior);
}

EmResult run_em_network(const ShotRecord& shots, const SuperPoissonParams& g, const PriorSpec& prior,
                        const EmConfig& config, const Network* net) {
  const Network& model = need(net);
  shots.validate();
  const CountHistogram hist = CountHistogram::from_counts(shots.counts);
  EmConfig cfg = config;
  cfg.e_step_engine = EStepEngine::kNetwork;
  if (!cfg.init_f) cfg.init_f = default_init_f(shots.counts);
  return run_em_loop(hist, g, cfg, [&](const SuperPoissonParams& f) {
    return network_posterior(model, hist, g, f, prior);
  });
}

SharedEmResult run_shared_em_network(std::span<const ShotRecord> records, const SuperPoissonParams& g,
                                     const PriorSpec& prior, const EmConfig& config, const Network* net) {
  const Network& model = need(net);
  std::vector<CountHistogram> hists;
  std::vector<Count> pooled;
  for (const ShotRecord& r : records) {
    r.validate();
    hists.push_back(CountHistogram::from_counts(r.counts));
    pooled.insert(pooled.end(), r.counts.begin(), r.counts.end());
  }
  EmConfig cfg = config;
  cfg.e_step_engine = EStepEngine::kNetwork;
  if (!cfg.init_f) cfg.init_f = default_init_f(pooled);
  return run_shared_em_loop(hists, g, cfg, [&](std::size_t j, const SuperPoissonParams& f) {
    return network_posterior(model, hists[j], g, f, prior);
  });
}

}  // namespace photoread
