#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "photoread/fixtures.hpp"
#include "photoread/parallel.hpp"
#include "photoread/posterior_grid.hpp"
#include "photoread/posterior_kernels.hpp"

using namespace photoread;
using namespace photoread::kernels;

namespace {

struct Case {
  std::vector<MixtureTerm> per_shot;
  std::vector<MixtureTerm> per_value;
  std::vector<double> multiplicity;
};

Case make_case(const SuperPoissonParams& g, const SuperPoissonParams& f, double l, std::size_t n, std::uint64_t seed) {
  const ShotRecord r = sample({g, f, l}, n, seed);
  const CountHistogram h = CountHistogram::from_counts(r.counts);
  Case c;
  for (std::size_t u = 0; u < h.unique(); ++u) {
    c.per_value.push_back(make_term(log_pmf(g, h.values[u]), log_pmf(f, h.values[u])));
    c.multiplicity.push_back(h.multiplicity[u]);
    for (int k = 0; k < static_cast<int>(h.multiplicity[u]); ++k) c.per_shot.push_back(c.per_value.back());
  }
  return c;
}

}  // namespace

TEST_CASE("term matches the direct mixture log-likelihood") {
  for (double lg : {-0.5, -3.0, -40.0}) {
    for (double lf : {-0.7, -2.0, -60.0}) {
      const MixtureTerm t = make_term(lg, lf);
      for (double l : {0.0, 0.1, 0.5, 0.93, 1.0}) {
        const double direct = std::log((1 - l) * std::exp(lg) + l * std::exp(lf));
        CHECK(term_log_likelihood(t, l) == doctest::Approx(direct).epsilon(1e-13));
      }
      CHECK(term_log_likelihood(t, 0.0) == doctest::Approx(lg).epsilon(1e-15));
      CHECK(term_log_likelihood(t, 1.0) == doctest::Approx(lf).epsilon(1e-15));
    }
  }
}

TEST_CASE("histogram kernel agrees with the serial per-shot reference") {
  for (const auto* fx : {&fixtures::kOverlap061, &fixtures::kSeparated}) {
    const Case c = make_case(fx->g, fx->f, 0.37, 700, 9);
    const std::vector<double> nodes = grid_nodes(1001);
    std::vector<double> ref(nodes.size()), hist(nodes.size());
    log_likelihood_reference(c.per_shot, nodes, ref);
    log_likelihood_histogram(c.per_value, c.multiplicity, nodes, hist);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (std::isinf(ref[k])) {
        CHECK(hist[k] == ref[k]);
      } else {
        CHECK(std::abs(hist[k] - ref[k]) <= 1e-9 * std::max(1.0, std::abs(ref[k])));
      }
    }
  }
}

TEST_CASE("histogram kernel is independent of the thread count") {
  const Case c = make_case(fixtures::kOverlap061.g, fixtures::kOverlap061.f, 0.6, 2000, 10);
  const std::vector<double> nodes = grid_nodes(1001);
  std::vector<double> one(nodes.size()), many(nodes.size());
  par::set_threads(1);
  log_likelihood_histogram(c.per_value, c.multiplicity, nodes, one);
  par::set_threads(4);
  log_likelihood_histogram(c.per_value, c.multiplicity, nodes, many);
  par::set_threads(1);
  CHECK(one == many);
}
