#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "photoread/error.hpp"
#include "photoread/experiments.hpp"
#include "photoread/fixtures.hpp"
#include "photoread/network_io.hpp"
#include "photoread/rng.hpp"

using namespace photoread;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

const RabiModel kRabi{kTwoPi * 25.1e3, 0.87};
const RamseyModel kRamsey{RamseyModel::sigma_from_t2(6.43e-3), kTwoPi * 767.0, 0.3, 0.5, 0.45};

template <typename Model>
std::vector<FitPoint> noiseless(const Model& m, const std::vector<double>& times) {
  std::vector<FitPoint> pts;
  for (double t : times) pts.push_back({t, m.occupation(t), 0.0});
  return pts;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

ExperimentData rabi_data(const fixtures::Fixture& fx, std::size_t n, std::uint64_t seed) {
  ExperimentData d;
  d.kind = ExperimentKind::kRabi;
  d.times = rabi_times();
  d.records = generate_experiment(kRabi, d.times, n, fx.g, fx.f, seed);
  for (double t : d.times) d.reference.push_back(kRabi.occupation(t));
  return d;
}

}  // namespace

TEST_CASE("fidelity") {
  for (double l : {0.0, 0.2, 0.5, 1.0}) CHECK(fidelity(l, l) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(fidelity(0.0, 1.0) == 0.0);
  CHECK(fidelity(0.5, 0.6) == doctest::Approx(std::pow(std::sqrt(0.3) + std::sqrt(0.2), 2)).epsilon(1e-15));
  CHECK(fidelity(0.5, 0.6) == doctest::Approx(0.98990).epsilon(1e-5));
  CHECK(fidelity(0.3, 0.7) == fidelity(0.7, 0.3));
  CHECK_THROWS_AS(fidelity(-0.1, 0.5), Error);
  CHECK_THROWS_AS(fidelity(0.5, 1.1), Error);
}

TEST_CASE("model curves") {
  CHECK(kRabi.occupation(0.0) == 0.0);
  const double l21 = kRabi.occupation(21e-6);
  CHECK(l21 == doctest::Approx(0.87 * std::pow(std::sin(std::numbers::pi * 25.1e3 * 21e-6), 2)).epsilon(1e-14));
  CHECK(l21 == doctest::Approx(0.8637).epsilon(1e-3));
  CHECK(kRamsey.occupation(1.0) == doctest::Approx(kRamsey.l0).epsilon(1e-15));
  CHECK(kRamsey.t2() == doctest::Approx(6.43e-3));
  CHECK(kRamsey.occupation(kRamsey.t2()) - kRamsey.l0 ==
        doctest::Approx(kRamsey.amp * std::exp(-1.0) * std::cos(kRamsey.delta_omega * kRamsey.t2() + kRamsey.phi)));
  CHECK(rabi_times().size() == 7);
  CHECK(rabi_times().back() == doctest::Approx(42e-6));
}

TEST_CASE("generation rejects occupations outside [0,1]") {
  const RamseyModel bad{1e-3, 1000.0, 0.0, 0.8, 0.5};
  const std::vector<double> t{0.0};
  CHECK_THROWS_AS(generate_experiment(bad, t, 10, {1, 1}, {9, 3}, 1), Error);
  const auto recs = generate_experiment(kRabi, rabi_times(), 50, {1, 1}, {9, 3}, 2);
  CHECK(recs.size() == 7);
  CHECK(recs[3].roi_id == "t3");
  CHECK(recs[3].counts == sample({{1, 1}, {9, 3}, kRabi.occupation(21e-6)}, 50, derive_seed(2, 3)).counts);
}

TEST_CASE("noiseless Rabi samples are recovered") {
  const RabiFit fit = fit_rabi(noiseless(kRabi, rabi_times()));
  CHECK(rel(fit.model.omega, kRabi.omega) < 1e-6);
  CHECK(rel(fit.model.amplitude, kRabi.amplitude) < 1e-6);

  const RabiModel full{kTwoPi * 40e3, 1.0};
  const RabiFit f2 = fit_rabi(noiseless(full, rabi_times()));
  CHECK(f2.model.amplitude <= 1.0);
  CHECK(rel(f2.model.omega, full.omega) < 1e-6);
}

TEST_CASE("noiseless Ramsey samples are recovered") {
  const RamseyFit fit = fit_ramsey(noiseless(kRamsey, ramsey_times()));
  CHECK(rel(fit.model.sigma, kRamsey.sigma) < 1e-6);
  CHECK(rel(fit.model.delta_omega, kRamsey.delta_omega) < 1e-6);
  CHECK(rel(fit.model.amp, kRamsey.amp) < 1e-6);
  CHECK(rel(fit.model.l0, kRamsey.l0) < 1e-6);
  CHECK(std::abs(fit.model.phi - kRamsey.phi) < 1e-6);

  RamseyModel shifted = kRamsey;
  shifted.phi += kTwoPi;
  const RamseyFit f2 = fit_ramsey(noiseless(shifted, ramsey_times()));
  CHECK(std::abs(f2.residual_norm - fit.residual_norm) < 1e-9);
  CHECK(std::abs(f2.model.phi - kRamsey.phi) < 1e-6);
}

TEST_CASE("degenerate fits") {
  std::vector<FitPoint> flat;
  for (double t : rabi_times()) flat.push_back({t, 0.4, 0.0});
  try {
    fit_rabi(flat);
    FAIL("expected a degenerate fit");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDegenerate);
  }
  CHECK_THROWS_AS(fit_rabi(std::vector<FitPoint>{{0, 0, 0}, {1e-6, 0.1, 0}}), Error);
  CHECK_THROWS_AS(fit_ramsey(noiseless(kRamsey, {0, 1e-3, 2e-3})), Error);
}

TEST_CASE("exact EM Rabi frequency within 5 percent") {
  const auto& fx = fixtures::kOverlap061;
  CompareConfig cfg;
  std::vector<double> err;
  for (int s = 0; s < 20; ++s) {
    const ExperimentResult r = run_method(rabi_data(fx, 200, derive_seed(500, s)), fx.g, Method::kEmExact, cfg);
    REQUIRE(r.rabi.has_value());
    err.push_back(rel(r.rabi->model.omega, kRabi.omega));
  }
  std::sort(err.begin(), err.end());
  CHECK(0.5 * (err[9] + err[10]) < 0.05);
}

TEST_CASE("methods agree on separated data") {
  const auto& fx = fixtures::kSeparated;
  const ExperimentData d = rabi_data(fx, 1000, 41);
  CompareConfig cfg;
  cfg.f_calibration = fx.f;
  cfg.methods = {Method::kThreshold, Method::kEmExact};
  std::optional<Network> net;
  const auto path = std::filesystem::path(PHOTOREAD_DATA_DIR) / "pi_network.weights";
  if (std::filesystem::exists(path)) {
    net.emplace(load_weights(path));
    cfg.network = &*net;
    cfg.methods.push_back(Method::kEmNetwork);
  }
  const std::vector<ExperimentResult> rs = compare_methods(d, fx.g, cfg);
  REQUIRE(rs.size() == cfg.methods.size());
  for (const auto& r : rs) {
    REQUIRE(r.rabi.has_value());
    CHECK(rel(r.rabi->model.omega, rs[0].rabi->model.omega) < 0.01);
    CHECK(std::abs(r.rabi->model.amplitude - rs[0].rabi->model.amplitude) < 0.01);
    CHECK(r.mean_fidelity > 0.995);
  }
}

TEST_CASE("network method without weights is a configuration error") {
  const auto& fx = fixtures::kOverlap061;
  CompareConfig cfg;
  cfg.methods = {Method::kEmNetwork};
  try {
    compare_methods(rabi_data(fx, 50, 1), fx.g, cfg);
    FAIL("expected a configuration error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
  }
  cfg.methods = {Method::kThreshold};
  try {
    run_method(rabi_data(fx, 50, 1), fx.g, Method::kThreshold, cfg);
    FAIL("expected a calibration error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kCalibration);
  }
}

TEST_CASE("method names") {
  CHECK(method_from_string("em") == Method::kEmExact);
  CHECK(method_from_string("em-net") == Method::kEmNetwork);
  CHECK(method_from_string("threshold") == Method::kThreshold);
  CHECK_THROWS_AS(method_from_string("magic"), Error);
  CHECK(experiment_kind_from_string("ramsey") == ExperimentKind::kRamsey);
}
