#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "photoread/count_model.hpp"
#include "photoread/pi_network.hpp"

namespace photoread {

struct BenchmarkConfig {
  std::vector<std::size_t> ns{100, 200, 500, 1000, 2000, 5000};
  int iterations = 10;  // EM iterations per task, no early stopping
  int repeats = 5;      // timed runs per N (median reported), after one warmup run
  std::uint64_t seed = 1;
  double l = 0.5;
  SuperPoissonParams g{0.8, 2.0};
  SuperPoissonParams f{11.625, 3.75};
};

struct BenchmarkRow {
  std::size_t n = 0;
  double exact_seconds = 0.0;      // per-shot exact E-step, 1001 nodes
  double network_seconds = 0.0;    // per-shot network E-step
  double histogram_seconds = 0.0;  // exact E-step on distinct counts (the library default)
  double speedup = 0.0;            // exact / network
  double exact_mean = 0.0;         // final posterior means, for a sanity comparison
  double network_mean = 0.0;
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;
  int iterations = 0;
  int repeats = 0;
  double exact_r2 = 0.0;  // linear fit of median time against N
  double network_r2 = 0.0;
  double exact_slope = 0.0;
  double network_slope = 0.0;
  double slope_ratio = 0.0;
  static constexpr double kPublishedSpeedup = 100.56;
  std::string environment;
};

/// Times both EM engines with a fixed iteration count (M-step included, I/O excluded).
BenchmarkReport run_benchmark(const Network& net, const BenchmarkConfig& config);

/// Least-squares line y = a + b x; returns (b, R^2).
std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace photoread
