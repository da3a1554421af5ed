#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "photoread/error.hpp"
#include "photoread/fixtures.hpp"
#include "photoread/network_em.hpp"
#include "photoread/pi_network.hpp"

using namespace photoread;

TEST_CASE("log-likelihood ratios match the closed form") {
  const auto& fx = fixtures::kOverlap061;
  const std::vector<Count> c{0, 1, 2, 5, 13, 60};
  const std::vector<double> s = encode_shots(c, fx.g, fx.f);
  REQUIRE(s.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const long double direct = std::log(oracle::pmf(fx.f, c[i]) / oracle::pmf(fx.g, c[i]));
    CHECK(s[i] == doctest::Approx(static_cast<double>(direct)).epsilon(1e-12));
  }
  CHECK(encode_shots(c, fx.g, fx.g) == std::vector<double>(c.size(), 0.0));
}

TEST_CASE("KL divergence") {
  const std::vector<double> t{0.5, 0.3, 0.2};
  const std::vector<double> p{0.2, 0.3, 0.5};
  const double expected = 0.5 * std::log(2.5) + 0.2 * std::log(0.4);
  CHECK(kl_divergence(t, p) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(kl_divergence(t, p) == doctest::Approx(0.27488721956224653));
  CHECK(kl_divergence(t, t) == 0.0);
  CHECK(kl_divergence(std::vector<double>{1, 0, 0}, std::vector<double>{0.5, 0.5, 0}) ==
        doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(kl_divergence(t, std::vector<double>{1.0}), Error);
}

TEST_CASE("architecture validation") {
  ArchitectureSpec a;
  a.grid_size = 1;
  CHECK_THROWS_AS(a.validate(), Error);
  a = {};
  a.encoder_widths = {};
  CHECK_THROWS_AS(a.validate(), Error);
  a = {};
  a.head_widths = {8, 0};
  CHECK_THROWS_AS(a.validate(), Error);
  NetworkWeights w = NetworkWeights::initialise(ArchitectureSpec{}, 1);
  w.head.back().bias.pop_back();
  CHECK_THROWS_AS(w.validate(), Error);
  w = NetworkWeights::initialise(ArchitectureSpec{}, 1);
  w.encoder[0].weight[0] = NAN;
  CHECK_THROWS_AS(w.validate(), Error);
  CHECK(activation_from_string("tanh") == Activation::kTanh);
  CHECK_THROWS_AS(activation_from_string("relu"), Error);
}

TEST_CASE("output is a normalised distribution") {
  const gradcheck::Problem p = gradcheck::make_problem(Activation::kAlgebraic, true, 3);
  const Network net(p.weights);
  const PosteriorGrid post = net.posterior({p.s, p.w}, p.aux);
  double sum = 0.0;
  for (double m : post.masses) {
    CHECK(m >= 0.0);
    sum += m;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(post.size() == p.weights.arch.grid_size);
}

TEST_CASE("output does not depend on shot order") {
  const NetworkWeights w = gradcheck::make_problem(Activation::kTanh, true, 4).weights;
  std::vector<double> s{0.3, -1.2, 2.5, 0.0, -0.7, 1.1, 0.3};
  const AuxFeatures aux{7, {1, 1}, {9, 3}};
  const PosteriorGrid a = forward(w, s, aux);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 5; ++k) {
    std::shuffle(s.begin(), s.end(), rng);
    CHECK(forward(w, s, aux).masses == a.masses);
  }

  const Network net(w);
  const auto& fx = fixtures::kOverlap061;
  ShotRecord r = sample({fx.g, fx.f, 0.5}, 120, 9);
  const CountHistogram h = CountHistogram::from_counts(r.counts);
  const PosteriorGrid per_shot = network_posterior(net, h, fx.g, fx.f);
  const PosteriorGrid collapsed = network_posterior_collapsed(net, h, fx.g, fx.f);
  for (std::size_t k = 0; k < per_shot.size(); ++k) {
    CHECK(collapsed.masses[k] == doctest::Approx(per_shot.masses[k]).epsilon(1e-9));
  }
}

TEST_CASE("prior multiplies into the network output") {
  const NetworkWeights w = gradcheck::make_problem(Activation::kAlgebraic, false, 5).weights;
  const Network net(w);
  const CountHistogram h = CountHistogram::from_counts(std::vector<Count>{0, 1, 4});
  const PosteriorGrid flat = network_posterior(net, h, {1, 1}, {9, 3});
  std::vector<double> prior(w.arch.grid_size, 0.0);
  prior[2] = 0.25;
  prior[7] = 0.75;
  const PosteriorGrid tilted = network_posterior(net, h, {1, 1}, {9, 3}, PriorSpec::grid_valued(prior));
  const double z = 0.25 * flat.masses[2] + 0.75 * flat.masses[7];
  CHECK(tilted.masses[2] == doctest::Approx(0.25 * flat.masses[2] / z).epsilon(1e-12));
  CHECK(tilted.masses[0] == 0.0);
}

TEST_CASE("analytic gradients match finite differences") {
  for (Activation act : {Activation::kTanh, Activation::kAlgebraic}) {
    for (bool readout : {false, true}) {
      const gradcheck::Problem p = gradcheck::make_problem(act, readout, readout ? 11 : 12);
      for (const gradcheck::TensorResult& r : gradcheck::check(p, 100)) {
        INFO(r.name << " activation " << to_string(act) << " readout " << readout);
        CHECK(r.checked > 0);
        CHECK(r.max_rel_error < 1e-4);
      }
    }
  }
}

TEST_CASE("gradient accumulates with the loss weight") {
  const gradcheck::Problem p = gradcheck::make_problem(Activation::kAlgebraic, true, 13);
  const Network net(p.weights);
  NetworkWeights once = NetworkWeights::zeros_like(p.weights), twice = once;
  const double l1 = net.loss_and_gradient({p.s, p.w}, p.aux, p.target, &once, 2.0);
  net.loss_and_gradient({p.s, p.w}, p.aux, p.target, &twice);
  const double l2 = net.loss_and_gradient({p.s, p.w}, p.aux, p.target, &twice);
  CHECK(l1 == l2);
  const auto a = once.tensors();
  const auto b = twice.tensors();
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t i = 0; i < a[t].size(); ++i) CHECK(a[t][i] == doctest::Approx(b[t][i]).epsilon(1e-12));
  }
}

TEST_CASE("initialisation is seeded") {
  CHECK(NetworkWeights::initialise(ArchitectureSpec{}, 5) == NetworkWeights::initialise(ArchitectureSpec{}, 5));
  CHECK(!(NetworkWeights::initialise(ArchitectureSpec{}, 5) == NetworkWeights::initialise(ArchitectureSpec{}, 6)));
  const NetworkWeights w = NetworkWeights::initialise(ArchitectureSpec{}, 5);
  std::size_t total = 0;
  for (auto t : w.tensors()) total += t.size();
  CHECK(total == w.parameter_count());
  CHECK(w.tensor_names().size() == w.tensors().size());
}
