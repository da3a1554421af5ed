#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "photoread/error.hpp"
#include "photoread/network_em.hpp"
#include "photoread/network_io.hpp"
#include "photoread/parallel.hpp"
#include "photoread/training.hpp"

using namespace photoread;

namespace {

ArchitectureSpec small_arch() {
  ArchitectureSpec a;
  a.encoder_widths = {8, 8};
  a.head_widths = {16};
  a.grid_size = 41;
  return a;
}

OptimizerConfig small_opt(int epochs) {
  OptimizerConfig o;
  o.batch_size = 32;
  o.epochs = epochs;
  o.learning_rate = 3e-3;
  return o;
}

}  // namespace

TEST_CASE("tasks are deterministic and well formed") {
  const TrainingRanges r;
  const TrainingTask a = generate_task(r, 5, 17, 201);
  const TrainingTask b = generate_task(r, 5, 17, 201);
  CHECK(a.s == b.s);
  CHECK(a.target == b.target);
  CHECK(a.f.mean() > a.g.mean());
  CHECK(a.n_shots >= r.n_min);
  CHECK(a.n_shots <= r.n_max);
  double tw = 0, tt = 0;
  for (double v : a.weights) tw += v;
  for (double v : a.target) tt += v;
  CHECK(tw == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tt == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(a.target.size() == 201);

  const TrainingSet small = generate_training_set(r, 10, 5, 201);
  const TrainingSet large = generate_training_set(r, 30, 5, 201);
  for (std::size_t k = 0; k < 10; ++k) CHECK(small.tasks[k].target == large.tasks[k].target);
}

TEST_CASE("task distribution spans the overlap range") {
  const TrainingSet set = generate_training_set(TrainingRanges{}, 2000, 9, 21);
  std::size_t low = 0, mid = 0, high = 0, near = 0;
  for (const TrainingTask& t : set.tasks) {
    const double o = overlap(t.f, t.g);
    if (o < 0.05) ++low;
    if (o >= 0.5 && o < 0.8) ++mid;
    if (o >= 0.8) ++high;
    if (t.f.beta == t.g.beta) ++near;
  }
  CHECK(low > 100);
  CHECK(mid > 50);
  CHECK(high > 50);
  CHECK(near > 120);
  CHECK(near < 280);
}

TEST_CASE("ranges and optimiser settings are validated") {
  TrainingRanges r;
  r.alpha_min = 0;
  CHECK_THROWS_AS(r.validate(), Error);
  r = {};
  r.n_min = 10;
  r.n_max = 5;
  CHECK_THROWS_AS(r.validate(), Error);
  OptimizerConfig o;
  o.validation_fraction = 1.0;
  CHECK_THROWS_AS(o.validate(), Error);
}

TEST_CASE("training reduces the loss and is reproducible") {
  const TrainingSet set = generate_training_set(TrainingRanges{}, 600, 3, 41);
  const TrainingOutcome a = train(set, small_arch(), small_opt(6), 1);
  const TrainingOutcome b = train(set, small_arch(), small_opt(6), 1);
  CHECK(a.weights == b.weights);
  CHECK(a.report.best_validation_kl < a.report.initial_train_loss);
  CHECK(a.report.epochs.size() == 6);
  CHECK(a.weights.meta.tasks == 600);
  CHECK(serialize_weights(a.weights) == serialize_weights(b.weights));
}

TEST_CASE("training does not depend on the thread count") {
  const TrainingSet set = generate_training_set(TrainingRanges{}, 200, 4, 41);
  par::set_threads(1);
  const TrainingOutcome one = train(set, small_arch(), small_opt(2), 2);
  par::set_threads(3);
  const TrainingOutcome three = train(set, small_arch(), small_opt(2), 2);
  par::set_threads(1);
  CHECK(one.weights == three.weights);
}

TEST_CASE("non-finite targets stop training") {
  TrainingSet set = generate_training_set(TrainingRanges{}, 64, 6, 41);
  set.tasks[3].target[0] = NAN;
  try {
    train(set, small_arch(), small_opt(1), 1);
    FAIL("expected a training error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kTraining);
  }
}

TEST_CASE("quantiles") {
  CHECK(quantile({3, 1, 2}, 0.5) == 2.0);
  CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(quantile({1, 2, 3, 4}, 1.0) == 4.0);
  CHECK(quantile({5}, 0.95) == 5.0);
  CHECK_THROWS_AS(quantile({}, 0.5), Error);
}

TEST_CASE("standardisation") {
  const TrainingSet set = generate_training_set(TrainingRanges{}, 300, 8, 21);
  const Standardization st = fit_standardization(set.tasks);
  for (std::size_t i = 0; i < 5; ++i) {
    double m = 0;
    for (const auto& t : set.tasks) m += (t.aux().raw()[i] - st.aux_mean[i]) / st.aux_scale[i];
    CHECK(std::abs(m / 300) < 1e-9);
    CHECK(st.aux_scale[i] > 0);
  }
}

TEST_CASE("shipped network approximates the exact posterior") {
  const std::filesystem::path path = std::filesystem::path(PHOTOREAD_DATA_DIR) / "pi_network.weights";
  if (!std::filesystem::exists(path)) {
    MESSAGE("no shipped weights");
    return;
  }
  const Network net(load_weights(path));
  const TrainingSet held = generate_training_set(TrainingRanges{}, 300, 777001, net.arch().grid_size);
  const KlReport kl = evaluate(net, held);
  CHECK(kl.median < 0.05);

  // Identical laws carry no information: the output should stay close to the prior.
  const SuperPoissonParams g{3, 1};
  const ShotRecord r = sample({g, g, 0.5}, 200, 3);
  const PosteriorGrid out = network_posterior(net, CountHistogram::from_counts(r.counts), g, g);
  const std::vector<double> flat(out.size(), 1.0 / static_cast<double>(out.size()));
  CHECK(kl_divergence(flat, out.masses) < 0.1);
}
