#include "photoread/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <limits>

#include "photoread/bayes_em.hpp"
#include "photoread/error.hpp"
#include "photoread/network_em.hpp"
#include "photoread/parallel.hpp"
#include "photoread/posterior_kernels.hpp"

namespace photoread {
namespace {

PosteriorGrid exact_per_shot(const CountHistogram& hist, const SuperPoissonParams& g, const SuperPoissonParams& f) {
  std::vector<kernels::MixtureTerm> terms;
  terms.reserve(hist.total);
  for (std::size_t u = 0; u < hist.unique(); ++u) {
    for (std::size_t k = 0; k < static_cast<std::size_t>(hist.multiplicity[u]); ++k) {
      terms.push_back(kernels::make_term(log_pmf(g, hist.values[u]), log_pmf(f, hist.values[u])));
    }
  }
  std::vector<double> nodes = grid_nodes(kDefaultGridSize);
  std::vector<double> ll(nodes.size());
  kernels::log_likelihood_reference(terms, nodes, ll);
  return normalise_log_weights(std::move(nodes), ll);
}

template <typename F>
double seconds(F&& run, double& result) {
  const auto t0 = std::chrono::steady_clock::now();
  result = run();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

}  // namespace

std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorKind::kDomain, "linear fit needs two or more points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  const double cxx = sxx - sx * sx / n;
  const double cxy = sxy - sx * sy / n;
  const double cyy = syy - sy * sy / n;
  const double slope = cxy / cxx;
  const double r2 = cyy > 0.0 ? cxy * cxy / (cxx * cyy) : 1.0;
  return {slope, r2};
}

BenchmarkReport run_benchmark(const Network& net, const BenchmarkConfig& config) {
  require(!config.ns.empty() && config.iterations >= 1 && config.repeats >= 1, ErrorKind::kConfig,
          "benchmark needs sample sizes, iterations >= 1 and repeats >= 1");
  BenchmarkReport report;
  report.iterations = config.iterations;
  report.repeats = config.repeats;

  EmConfig em;
  em.max_iter = config.iterations;
  em.tol_theta = std::numeric_limits<double>::min();  // never stop early
  em.tol_mean = std::numeric_limits<double>::min();

  struct Task {
    CountHistogram hist;
    EmConfig cfg;
    std::vector<double> exact, network, histogram;
  };
  std::vector<Task> tasks;
  for (std::size_t n : config.ns) {
    const ShotRecord shots = sample(MixtureModel{config.g, config.f, config.l}, n, config.seed + n);
    Task t{CountHistogram::from_counts(shots.counts), em, {}, {}, {}};
    t.cfg.init_f = default_init_f(shots.counts);
    tasks.push_back(std::move(t));
  }

  // One warmup pass, then repeats cycle over every N so slow spells hit all sizes alike.
  std::vector<BenchmarkRow> rows(tasks.size());
  for (int r = -1; r < config.repeats; ++r) {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      Task& t = tasks[i];
      BenchmarkRow& row = rows[i];
      const double te = seconds(
          [&] {
            return run_em_loop(t.hist, config.g, t.cfg, [&](const SuperPoissonParams& f) {
                     return exact_per_shot(t.hist, config.g, f);
                   }).posterior.mean;
          },
          row.exact_mean);
      const double tn = seconds(
          [&] {
            return run_em_loop(t.hist, config.g, t.cfg, [&](const SuperPoissonParams& f) {
                     return network_posterior(net, t.hist, config.g, f);
                   }).posterior.mean;
          },
          row.network_mean);
      double unused = 0.0;
      const double th = seconds(
          [&] {
            return run_em_loop(t.hist, config.g, t.cfg, [&](const SuperPoissonParams& f) {
                     return compute_posterior(t.hist, config.g, f, PriorSpec::uniform(), kDefaultGridSize);
                   }).posterior.mean;
          },
          unused);
      if (r < 0) continue;
      t.exact.push_back(te);
      t.network.push_back(tn);
      t.histogram.push_back(th);
    }
  }
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    BenchmarkRow& row = rows[i];
    row.n = config.ns[i];
    row.exact_seconds = median(tasks[i].exact);
    row.network_seconds = median(tasks[i].network);
    row.histogram_seconds = median(tasks[i].histogram);
    row.speedup = row.exact_seconds / row.network_seconds;
    report.rows.push_back(row);
  }

  std::vector<double> x, te, tn;
  for (const BenchmarkRow& r : report.rows) {
    x.push_back(static_cast<double>(r.n));
    te.push_back(r.exact_seconds);
    tn.push_back(r.network_seconds);
  }
  if (x.size() >= 2) {
    std::tie(report.exact_slope, report.exact_r2) = linear_fit(x, te);
    std::tie(report.network_slope, report.network_r2) = linear_fit(x, tn);
    report.slope_ratio = report.exact_slope / report.network_slope;
  }
  report.environment = std::string("threads=") + std::to_string(par::max_threads()) +
                       (par::kHaveOpenMP ? " openmp" : " serial") +
#if defined(__VERSION__)
                       " compiler=" + __VERSION__ +
#endif
#if defined(__AVX2__)
                       " avx2"
#else
                       ""
#endif
      ;
  return report;
}

}  // namespace photoread
