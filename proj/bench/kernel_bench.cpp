// Serial per-shot log-likelihood kernel against the OpenMP histogram kernel.
#include <chrono>
#include <cstdio>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "photoread/count_model.hpp"
#include "photoread/fixtures.hpp"
#include "photoread/parallel.hpp"
#include "photoread/posterior_grid.hpp"
#include "photoread/posterior_kernels.hpp"

using namespace photoread;

namespace {

template <typename F>
double time_best(int repeats, F&& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (s < best) best = s;
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) : par::max_threads();
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 5;
  par::set_threads(threads);
  const auto& fx = fixtures::kOverlap061;
  const std::vector<double> nodes = grid_nodes(kDefaultGridSize);
  std::vector<double> out(nodes.size());

  std::printf("threads %d  openmp %s\n", threads, par::kHaveOpenMP ? "yes" : "no");
  std::printf("%8s %14s %14s %10s %12s\n", "N", "serial_s", "histogram_s", "speedup", "max_abs_diff");
  for (std::size_t n : {100u, 1000u, 10000u, 100000u}) {
    const ShotRecord r = sample({fx.g, fx.f, 0.5}, n, 7 + n);
    const CountHistogram h = CountHistogram::from_counts(r.counts);
    std::vector<kernels::MixtureTerm> per_value, per_shot;
    for (std::size_t u = 0; u < h.unique(); ++u) {
      per_value.push_back(kernels::make_term(log_pmf(fx.g, h.values[u]), log_pmf(fx.f, h.values[u])));
    }
    for (Count c : r.counts) per_shot.push_back(kernels::make_term(log_pmf(fx.g, c), log_pmf(fx.f, c)));

    std::vector<double> ref(nodes.size());
    const double ts = time_best(repeats, [&] { kernels::log_likelihood_reference(per_shot, nodes, ref); });
    const double th =
        time_best(repeats, [&] { kernels::log_likelihood_histogram(per_value, h.multiplicity, nodes, out); });
    double diff = 0.0;
    for (std::size_t k = 1; k + 1 < nodes.size(); ++k) diff = std::max(diff, std::abs(ref[k] - out[k]));
    std::printf("%8zu %14.6f %14.6f %10.1f %12.3e\n", n, ts, th, ts / th, diff);
  }
  return 0;
}
