#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "photoread/fixtures.hpp"
#include "photoread/rng.hpp"
#include "photoread/threshold_readout.hpp"

using namespace photoread;

namespace {

/// Exhaustive scan in long double; returns (t, total error).
std::pair<Count, long double> scan(const SuperPoissonParams& g, const SuperPoissonParams& f, Count limit) {
  Count best_t = 0;
  long double best = 10;
  for (Count t = 0; t <= limit; ++t) {
    long double dark_le = 0, bright_le = 0;
    for (Count n = 0; n <= t; ++n) {
      dark_le += oracle::pmf(g, n);
      bright_le += oracle::pmf(f, n);
    }
    const long double e = (1 - dark_le) + bright_le;
    if (e < best - 1e-15L) {
      best = e;
      best_t = t;
    }
  }
  return {best_t, best};
}

}  // namespace

TEST_CASE("separated fixture thresholds cleanly") {
  const auto& fx = fixtures::kSeparated;
  const ThresholdSpec s = choose_threshold(fx.g, fx.f);
  CHECK(s.total_error() < 1e-3);
  const auto [t, e] = scan(fx.g, fx.f, 200);
  CHECK(s.n_th == t);
  CHECK(s.total_error() == doctest::Approx(static_cast<double>(e)).epsilon(1e-6));
}

TEST_CASE("overlapping fixture misclassifies heavily") {
  const auto& fx = fixtures::kOverlap061;
  const ThresholdSpec s = choose_threshold(fx.g, fx.f);
  CHECK(s.total_error() > 0.3);
  const auto [t, e] = scan(fx.g, fx.f, 60);
  CHECK(s.n_th == t);
  CHECK(s.total_error() == doctest::Approx(static_cast<double>(e)).epsilon(1e-9));
}

TEST_CASE("identical laws are uninformative") {
  const SuperPoissonParams p{3, 1};
  for (Count t = 0; t < 20; ++t) CHECK(threshold_errors(p, p, t).total_error() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(choose_threshold(p, p).n_th == 0);
}

TEST_CASE("rates lie in [0,1]") {
  const auto& fx = fixtures::kOverlap072;
  for (Count t = 0; t < 30; ++t) {
    const ThresholdSpec s = threshold_errors(fx.g, fx.f, t);
    CHECK(s.dark_above >= 0.0);
    CHECK(s.dark_above <= 1.0);
    CHECK(s.bright_below >= 0.0);
    CHECK(s.bright_below <= 1.0);
  }
}

TEST_CASE("bright-event frequency") {
  ThresholdSpec s;
  s.n_th = 5;
  CHECK(estimate_threshold(std::vector<Count>{0, 1, 5, 5}, s) == 0.0);
  CHECK(estimate_threshold(std::vector<Count>{6, 9, 100}, s) == 1.0);
  std::vector<Count> c(200, 0);
  for (int i = 0; i < 140; ++i) c[i] = 10;
  CHECK(estimate_threshold(c, s) == doctest::Approx(0.7));

  const ShotRecord r = sample({fixtures::kOverlap061.g, fixtures::kOverlap061.f, 0.5}, 300, 3);
  double prev = 2.0;
  for (Count t = 0; t < 20; ++t) {
    s.n_th = t;
    const double v = estimate_threshold(r, s);
    CHECK(v <= prev);
    CHECK(v >= 0.0);
    prev = v;
  }
}

TEST_CASE("threshold recovers l only when the laws separate") {
  auto hit_rate = [](const fixtures::Fixture& fx, std::uint64_t base) {
    const ThresholdSpec s = choose_threshold(fx.g, fx.f);
    int hits = 0;
    for (int k = 0; k < 100; ++k) {
      const double l = 0.1;
      const ShotRecord r = sample({fx.g, fx.f, l}, 200, derive_seed(base, k));
      if (std::abs(estimate_threshold(r, s) - l) < 0.05) ++hits;
    }
    return hits;
  };
  CHECK(hit_rate(fixtures::kSeparated, 90) >= 95);
  CHECK(hit_rate(fixtures::kOverlap061, 91) <= 50);
}
