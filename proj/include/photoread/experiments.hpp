#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "photoread/bayes_em.hpp"
#include "photoread/count_model.hpp"
#include "photoread/pi_network.hpp"

namespace photoread {

/// Relative readout fidelity [sqrt(a b) + sqrt((1-a)(1-b))]^2; arguments must lie in [0, 1].
double fidelity(double l_ref, double l_est);

/// l(t) = A sin^2(Omega t / 2).
struct RabiModel {
  double omega = 0.0;      // rad/s
  double amplitude = 0.0;  // in [0, 1]

  double occupation(double t) const;
  void validate() const;
};

/// l(t) = amp exp(-t^2 / (2 sigma^2)) cos(delta_omega t + phi) + l0.
/// T2 is the 1/e time of the envelope: exp(-t^2/T2^2), so T2 = sigma sqrt(2).
struct RamseyModel {
  double sigma = 0.0;        // s
  double delta_omega = 0.0;  // rad/s
  double phi = 0.0;          // rad
  double l0 = 0.5;
  double amp = 0.5;

  double occupation(double t) const;
  double t2() const;
  static double sigma_from_t2(double t2);
  void validate() const;
};

enum class ExperimentKind { kRabi, kRamsey };
std::string_view to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(std::string_view name);

/// One shot record per time point; record j is seeded from (seed, j). Occupations outside
/// [0, 1] raise a domain error.
std::vector<ShotRecord> generate_experiment(const RabiModel& model, std::span<const double> times,
                                            std::size_t n_shots, const SuperPoissonParams& g,
                                            const SuperPoissonParams& f, std::uint64_t seed);
std::vector<ShotRecord> generate_experiment(const RamseyModel& model, std::span<const double> times,
                                            std::size_t n_shots, const SuperPoissonParams& g,
                                            const SuperPoissonParams& f, std::uint64_t seed);

/// Rabi sampling times, 0 to 42 us in 7 us steps.
std::vector<double> rabi_times();
/// 0 to 10 ms in 0.25 ms steps.
std::vector<double> ramsey_times();

struct FitPoint {
  double t = 0.0;
  double l = 0.0;
  double sd = 0.0;  // <= 0: no uncertainty available
};

struct FitOptions {
  double freq_min_hz = 0.0;  // 0 selects the model default
  double freq_max_hz = 0.0;
  std::size_t freq_steps = 0;
  bool weighted = true;      // 1/sd^2 when every point has sd > 0
  double sd_floor = 1e-4;
};

struct RabiFit {
  RabiModel model;
  double residual_norm = 0.0;
};

struct RamseyFit {
  RamseyModel model;
  double residual_norm = 0.0;
};

/// Default scan ranges stop at the Nyquist frequency of the smallest time step.
///
/// Frequency scan (default 1 to 100 kHz) with the amplitude solved in closed form, then
/// Levenberg-Marquardt on (Omega, A). A is clamped to [0, 1].
RabiFit fit_rabi(std::span<const FitPoint> points, const FitOptions& options = {});

/// (delta_omega, sigma) scan (default 0.05 to 5 kHz) with the linear parameters projected out,
/// then Levenberg-Marquardt on all five parameters.
RamseyFit fit_ramsey(std::span<const FitPoint> points, const FitOptions& options = {});

enum class Method { kThreshold, kEmExact, kEmNetwork };
std::string_view to_string(Method m);
Method method_from_string(std::string_view name);

struct PointEstimate {
  double t = 0.0;
  double l = 0.0;
  double sd = 0.0;
  double reference = 0.0;
  double fidelity = 0.0;
};

struct ExperimentResult {
  Method method = Method::kEmExact;
  ExperimentKind kind = ExperimentKind::kRabi;
  std::vector<PointEstimate> points;
  double mean_fidelity = 0.0;
  std::optional<RabiFit> rabi;
  std::optional<RamseyFit> ramsey;
  std::string fit_error;  // set when the fit was degenerate
  SuperPoissonParams theta_f;  // EM methods: final bright law
  int em_iterations = 0;
  bool em_converged = false;
  bool degenerate_bright = false;
};

struct ExperimentData {
  ExperimentKind kind = ExperimentKind::kRabi;
  std::vector<double> times;
  std::vector<ShotRecord> records;
  std::vector<double> reference;  // per time point: ground truth or long-exposure estimate
};

struct CompareConfig {
  std::vector<Method> methods{Method::kThreshold, Method::kEmExact, Method::kEmNetwork};
  EmConfig em;
  PriorSpec prior = PriorSpec::uniform();
  /// All records share one bright law in the M-step; false runs an independent EM per point.
  bool shared_bright = true;
  /// Threshold placement needs the bright law; without it the threshold method is skipped.
  std::optional<SuperPoissonParams> f_calibration;
  const Network* network = nullptr;
  FitOptions fit;
  bool fit_model = true;
};

/// Estimates for one method.
ExperimentResult run_method(const ExperimentData& data, const SuperPoissonParams& g, Method method,
                            const CompareConfig& config);

/// Every requested method on the same shots. A network method without weights raises kConfig.
std::vector<ExperimentResult> compare_methods(const ExperimentData& data, const SuperPoissonParams& g,
                                              const CompareConfig& config);

}  // namespace photoread
