#pragma once

#include <span>
#include <vector>

#include "photoread/bayes_em.hpp"
#include "photoread/pi_network.hpp"

namespace photoread {

/// Network E-step: s per shot (shots taken in ascending count order), theta_f through aux,
/// prior multiplied into the softmax output. Posterior lives on the network's own grid.
PosteriorGrid network_posterior(const Network& net, const CountHistogram& hist, const SuperPoissonParams& g,
                                const SuperPoissonParams& f, const PriorSpec& prior = PriorSpec::uniform());

/// Same posterior from the distinct counts with pooling weights multiplicity / N. Agrees with
/// network_posterior up to summation order; used for training and batch evaluation.
PosteriorGrid network_posterior_collapsed(const Network& net, const CountHistogram& hist,
                                          const SuperPoissonParams& g, const SuperPoissonParams& f,
                                          const PriorSpec& prior = PriorSpec::uniform());

/// The run_em loop with the network E-step. `net` null raises a configuration error.
/// config.grid_size is ignored: the grid is the network's.
EmResult run_em_network(const ShotRecord& shots, const SuperPoissonParams& g, const PriorSpec& prior,
                        const EmConfig& config, const Network* net);

SharedEmResult run_shared_em_network(std::span<const ShotRecord> records, const SuperPoissonParams& g,
                                     const PriorSpec& prior, const EmConfig& config, const Network* net);

}  // namespace photoread
