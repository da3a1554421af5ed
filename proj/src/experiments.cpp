#include "photoread/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>

#include "photoread/error.hpp"
#include "photoread/network_em.hpp"
#include "photoread/rng.hpp"
#include "photoread/threshold_readout.hpp"

namespace photoread {

double fidelity(double l_ref, double l_est) {
  require(l_ref >= 0.0 && l_ref <= 1.0 && l_est >= 0.0 && l_est <= 1.0, ErrorKind::kDomain,
          "fidelity needs occupations in [0, 1]");
  const double a = std::sqrt(l_ref * l_est) + std::sqrt((1.0 - l_ref) * (1.0 - l_est));
  return std::clamp(a * a, 0.0, 1.0);
}

double RabiModel::occupation(double t) const {
  const double s = std::sin(0.5 * omega * t);
  return amplitude * s * s;
}

void RabiModel::validate() const {
  require(std::isfinite(omega) && omega > 0.0, ErrorKind::kDomain, "Rabi frequency must be positive");
  require(amplitude >= 0.0 && amplitude <= 1.0, ErrorKind::kDomain, "Rabi amplitude must lie in [0, 1]");
}

double RamseyModel::occupation(double t) const {
  return amp * std::exp(-t * t / (2.0 * sigma * sigma)) * std::cos(delta_omega * t + phi) + l0;
}

double RamseyModel::t2() const { return sigma * std::numbers::sqrt2; }
double RamseyModel::sigma_from_t2(double t2) { return t2 / std::numbers::sqrt2; }

void RamseyModel::validate() const {
  require(std::isfinite(sigma) && sigma > 0.0, ErrorKind::kDomain, "Ramsey decay time must be positive");
  require(std::isfinite(delta_omega) && std::isfinite(phi) && std::isfinite(l0) && std::isfinite(amp),
          ErrorKind::kDomain, "Ramsey parameters must be finite");
}

std::string_view to_string(ExperimentKind kind) { return kind == ExperimentKind::kRabi ? "rabi" : "ramsey"; }

ExperimentKind experiment_kind_from_string(std::string_view name) {
  if (name == "rabi") return ExperimentKind::kRabi;
  if (name == "ramsey") return ExperimentKind::kRamsey;
  fail(ErrorKind::kConfig, "unknown experiment '" + std::string(name) + "' (expected rabi or ramsey)");
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kThreshold: return "threshold";
    case Method::kEmExact: return "em_exact";
    case Method::kEmNetwork: return "em_network";
  }
  return "unknown";
}

Method method_from_string(std::string_view name) {
  if (name == "threshold") return Method::kThreshold;
  if (name == "em" || name == "em_exact") return Method::kEmExact;
  if (name == "em-net" || name == "em_network") return Method::kEmNetwork;
  fail(ErrorKind::kConfig, "unknown method '" + std::string(name) + "' (expected threshold, em or em-net)");
}

namespace {

std::vector<ShotRecord> generate(const std::function<double(double)>& l_of_t, std::span<const double> times,
                                 std::size_t n_shots, const SuperPoissonParams& g, const SuperPoissonParams& f,
                                 std::uint64_t seed) {
  require(n_shots >= 1, ErrorKind::kDomain, "each time point needs at least one shot");
  std::vector<ShotRecord> records;
  for (std::size_t j = 0; j < times.size(); ++j) {
    const double l = l_of_t(times[j]);
    require(l >= 0.0 && l <= 1.0, ErrorKind::kDomain,
            "model occupation " + std::to_string(l) + " at t = " + std::to_string(times[j]) + " is outside [0, 1]");
    records.push_back(sample(MixtureModel{g, f, l}, n_shots, derive_seed(seed, j)));
    records.back().roi_id = "t" + std::to_string(j);
  }
  return records;
}

}  // namespace

std::vector<ShotRecord> generate_experiment(const RabiModel& model, std::span<const double> times,
                                            std::size_t n_shots, const SuperPoissonParams& g,
                                            const SuperPoissonParams& f, std::uint64_t seed) {
  model.validate();
  return generate([&](double t) { return model.occupation(t); }, times, n_shots, g, f, seed);
}

std::vector<ShotRecord> generate_experiment(const RamseyModel& model, std::span<const double> times,
                                            std::size_t n_shots, const SuperPoissonParams& g,
                                            const SuperPoissonParams& f, std::uint64_t seed) {
  model.validate();
  return generate([&](double t) { return model.occupation(t); }, times, n_shots, g, f, seed);
}

std::vector<double> rabi_times() {
  std::vector<double> t;
  for (int k = 0; k <= 6; ++k) t.push_back(7e-6 * k);
  return t;
}

std::vector<double> ramsey_times() {
  std::vector<double> t;
  for (int k = 0; k <= 40; ++k) t.push_back(0.25e-3 * k);
  return t;
}

// --- fitting ------------------------------------------------------------------

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Residual r_i = sqrt(w_i) (model_i - y_i) with analytic Jacobian.
struct LeastSquares {
  int n_params;
  int n_values;
  std::function<void(const VectorXd&, VectorXd&)> residual;
  std::function<void(const VectorXd&, MatrixXd&)> jacobian;

  int inputs() const { return n_params; }
  int values() const { return n_values; }
  int operator()(const VectorXd& x, VectorXd& r) const {
    residual(x, r);
    return 0;
  }
  int df(const VectorXd& x, MatrixXd& j) const {
    jacobian(x, j);
    return 0;
  }
};

void levenberg_marquardt(LeastSquares& problem, VectorXd& x) {
  Eigen::LevenbergMarquardt<LeastSquares> lm(problem);
  lm.parameters.ftol = 1e-15;
  lm.parameters.xtol = 1e-15;
  lm.parameters.gtol = 0.0;
  lm.parameters.maxfev = 2000;
  lm.minimize(x);
}

std::vector<double> fit_weights(std::span<const FitPoint> points, const FitOptions& options) {
  std::vector<double> w(points.size(), 1.0);
  if (!options.weighted) return w;
  for (const FitPoint& p : points) {
    if (!(p.sd > 0.0)) return w;
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double sd = std::max(points[i].sd, options.sd_floor);
    w[i] = 1.0 / (sd * sd);
  }
  return w;
}

void check_points(std::span<const FitPoint> points, std::size_t min_points) {
  require(points.size() >= min_points, ErrorKind::kDomain,
          "fit needs at least " + std::to_string(min_points) + " points");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < points.size(); ++i) {
    require(std::isfinite(points[i].t) && std::isfinite(points[i].l), ErrorKind::kDomain, "fit points must be finite");
    if (i > 0) require(points[i].t > points[i - 1].t, ErrorKind::kDomain, "fit times must be strictly increasing");
    lo = std::min(lo, points[i].l);
    hi = std::max(hi, points[i].l);
  }
  require(hi - lo > 1e-12, ErrorKind::kDegenerate, "all occupations are equal; the model is not identifiable");
}

/// 1 / (2 dt_min): above this a uniformly sampled sinusoid has an exact alias below it.
double nyquist_hz(std::span<const FitPoint> points) {
  double dt = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < points.size(); ++i) dt = std::min(dt, points[i].t - points[i - 1].t);
  return 0.5 / dt;
}

double wrap_phase(double phi) {
  const double two_pi = 2.0 * std::numbers::pi;
  phi = std::fmod(phi, two_pi);
  if (phi <= -std::numbers::pi) phi += two_pi;
  if (phi > std::numbers::pi) phi -= two_pi;
  return phi;
}

}  // namespace

RabiFit fit_rabi(std::span<const FitPoint> points, const FitOptions& options) {
  check_points(points, 3);
  const std::vector<double> w = fit_weights(points, options);
  const double f_lo = options.freq_min_hz > 0.0 ? options.freq_min_hz : 1e3;
  const double f_hi = options.freq_max_hz > 0.0 ? options.freq_max_hz : std::min(100e3, nyquist_hz(points));
  const std::size_t steps = options.freq_steps > 0 ? options.freq_steps : 4000;
  require(f_hi > f_lo, ErrorKind::kConfig, "frequency scan range is empty");
  const std::size_t n = points.size();

  auto ssr = [&](double omega, double amplitude) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = RabiModel{omega, amplitude}.occupation(points[i].t) - points[i].l;
      s += w[i] * r * r;
    }
    return s;
  };
  auto best_amplitude = [&](double omega) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = std::sin(0.5 * omega * points[i].t);
      num += w[i] * points[i].l * s * s;
      den += w[i] * s * s * s * s;
    }
    return den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : 0.0;
  };

  double best_omega = 2.0 * std::numbers::pi * f_lo;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k <= steps; ++k) {
    const double omega = 2.0 * std::numbers::pi * (f_lo + (f_hi - f_lo) * static_cast<double>(k) / steps);
    const double cost = ssr(omega, best_amplitude(omega));
    if (cost < best_cost) {
      best_cost = cost;
      best_omega = omega;
    }
  }

  // Refine in (Omega * t_scale, A) so both coordinates are O(1).
  const double t_scale = std::max(points.back().t, 1e-300);
  auto model_residual = [&](double omega, double amplitude, VectorXd& r) {
    for (std::size_t i = 0; i < n; ++i) {
      r[static_cast<Eigen::Index>(i)] =
          std::sqrt(w[i]) * (RabiModel{omega, amplitude}.occupation(points[i].t) - points[i].l);
    }
  };
  LeastSquares both{2, static_cast<int>(n),
                    [&](const VectorXd& x, VectorXd& r) { model_residual(x[0] / t_scale, x[1], r); },
                    [&](const VectorXd& x, MatrixXd& j) {
                      const double omega = x[0] / t_scale;
                      for (std::size_t i = 0; i < n; ++i) {
                        const double t = points[i].t;
                        const double s = std::sin(0.5 * omega * t);
                        const double c = std::cos(0.5 * omega * t);
                        const double sw = std::sqrt(w[i]);
                        const auto row = static_cast<Eigen::Index>(i);
                        j(row, 0) = sw * x[1] * s * c * t / t_scale;
                        j(row, 1) = sw * s * s;
                      }
                    }};
  VectorXd x(2);
  x << best_omega * t_scale, best_amplitude(best_omega);
  levenberg_marquardt(both, x);

  RabiModel model{std::abs(x[0]) / t_scale, x[1]};
  if (!(model.amplitude >= 0.0 && model.amplitude <= 1.0)) {
    const double clamped = std::clamp(std::isfinite(model.amplitude) ? model.amplitude : 0.0, 0.0, 1.0);
    LeastSquares omega_only{1, static_cast<int>(n),
                            [&](const VectorXd& y, VectorXd& r) { model_residual(y[0] / t_scale, clamped, r); },
                            [&](const VectorXd& y, MatrixXd& j) {
                              const double omega = y[0] / t_scale;
                              for (std::size_t i = 0; i < n; ++i) {
                                const double t = points[i].t;
                                j(static_cast<Eigen::Index>(i), 0) = std::sqrt(w[i]) * clamped *
                                                                     std::sin(0.5 * omega * t) *
                                                                     std::cos(0.5 * omega * t) * t / t_scale;
                              }
                            }};
    VectorXd y(1);
    y << best_omega * t_scale;
    levenberg_marquardt(omega_only, y);
    model = {std::abs(y[0]) / t_scale, clamped};
  }
  // Keep the scan optimum if refinement wandered off.
  if (!(ssr(model.omega, model.amplitude) <= best_cost)) model = {best_omega, best_amplitude(best_omega)};
  return {model, std::sqrt(ssr(model.omega, model.amplitude))};
}

RamseyFit fit_ramsey(std::span<const FitPoint> points, const FitOptions& options) {
  check_points(points, 6);
  const std::vector<double> w = fit_weights(points, options);
  const double f_lo = options.freq_min_hz > 0.0 ? options.freq_min_hz : 50.0;
  const double f_hi = options.freq_max_hz > 0.0 ? options.freq_max_hz : std::min(5e3, nyquist_hz(points));
  const std::size_t steps = options.freq_steps > 0 ? options.freq_steps : 1000;
  require(f_hi > f_lo, ErrorKind::kConfig, "frequency scan range is empty");
  const std::size_t n = points.size();
  const double span_t = points.back().t - points.front().t;
  require(span_t > 0.0, ErrorKind::kDomain, "fit times must span a positive interval");

  // For fixed (sigma, delta_omega) the model is linear in (l0, amp cos phi, -amp sin phi).
  struct Projection {
    double cost;
    RamseyModel model;
  };
  auto project = [&](double sigma, double dw) {
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const double t = points[i].t;
      const double e = std::exp(-t * t / (2.0 * sigma * sigma));
      const Eigen::Vector3d phi(1.0, e * std::cos(dw * t), e * std::sin(dw * t));
      a += w[i] * phi * phi.transpose();
      b += w[i] * points[i].l * phi;
    }
    const Eigen::Vector3d c = a.ldlt().solve(b);
    RamseyModel m{sigma, dw, std::atan2(-c[2], c[1]), c[0], std::hypot(c[1], c[2])};
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = m.occupation(points[i].t) - points[i].l;
      cost += w[i] * r * r;
    }
    return Projection{std::isfinite(cost) ? cost : std::numeric_limits<double>::infinity(), m};
  };

  constexpr int kSigmaSteps = 40;
  Projection best{std::numeric_limits<double>::infinity(), {}};
  for (std::size_t k = 0; k <= steps; ++k) {
    const double dw = 2.0 * std::numbers::pi * (f_lo + (f_hi - f_lo) * static_cast<double>(k) / steps);
    for (int s = 0; s <= kSigmaSteps; ++s) {
      const double sigma = span_t * std::pow(10.0, -1.3 + 2.6 * s / kSigmaSteps);
      const Projection p = project(sigma, dw);
      if (p.cost < best.cost) best = p;
    }
  }

  // x = (sigma / T, delta_omega * T, phi, l0, amp) with T the time span.
  const double T = span_t;
  auto unpack = [&](const VectorXd& x) { return RamseyModel{x[0] * T, x[1] / T, x[2], x[3], x[4]}; };
  LeastSquares problem{
      5, static_cast<int>(n),
      [&](const VectorXd& x, VectorXd& r) {
        const RamseyModel m = unpack(x);
        for (std::size_t i = 0; i < n; ++i) {
          r[static_cast<Eigen::Index>(i)] = std::sqrt(w[i]) * (m.occupation(points[i].t) - points[i].l);
        }
      },
      [&](const VectorXd& x, MatrixXd& j) {
        const RamseyModel m = unpack(x);
        for (std::size_t i = 0; i < n; ++i) {
          const double t = points[i].t;
          const double e = std::exp(-t * t / (2.0 * m.sigma * m.sigma));
          const double c = std::cos(m.delta_omega * t + m.phi);
          const double s = std::sin(m.delta_omega * t + m.phi);
          const double sw = std::sqrt(w[i]);
          const auto row = static_cast<Eigen::Index>(i);
          j(row, 0) = sw * m.amp * e * c * (t * t / (m.sigma * m.sigma * m.sigma)) * T;
          j(row, 1) = -sw * m.amp * e * s * t / T;
          j(row, 2) = -sw * m.amp * e * s;
          j(row, 3) = sw;
          j(row, 4) = sw * e * c;
        }
      }};
  VectorXd x(5);
  x << best.model.sigma / T, best.model.delta_omega * T, best.model.phi, best.model.l0, best.model.amp;
  levenberg_marquardt(problem, x);
  RamseyModel m = unpack(x);

  // Canonical form: sigma > 0, amp >= 0, delta_omega >= 0, phi in (-pi, pi].
  m.sigma = std::abs(m.sigma);
  if (m.amp < 0.0) {
    m.amp = -m.amp;
    m.phi += std::numbers::pi;
  }
  if (m.delta_omega < 0.0) {
    m.delta_omega = -m.delta_omega;
    m.phi = -m.phi;
  }
  m.phi = wrap_phase(m.phi);
  double cost = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = m.occupation(points[i].t) - points[i].l;
    cost += w[i] * r * r;
  }
  if (!(cost <= best.cost)) {
    m = best.model;
    m.phi = wrap_phase(m.phi);
    cost = best.cost;
  }
  return {m, std::sqrt(cost)};
}

// --- method comparison ----------------------------------------------------------

ExperimentResult run_method(const ExperimentData& data, const SuperPoissonParams& g, Method method,
                            const CompareConfig& config) {
  const std::size_t n_points = data.times.size();
  require(n_points >= 1 && data.records.size() == n_points, ErrorKind::kDomain,
          "experiment needs one shot record per time point");
  require(data.reference.empty() || data.reference.size() == n_points, ErrorKind::kDomain,
          "reference occupations must match the time points");
  for (std::size_t j = 1; j < n_points; ++j) {
    require(data.times[j] > data.times[j - 1], ErrorKind::kInvariant, "time points must be strictly increasing");
  }

  ExperimentResult result;
  result.method = method;
  result.kind = data.kind;
  result.points.resize(n_points);
  for (std::size_t j = 0; j < n_points; ++j) result.points[j].t = data.times[j];

  switch (method) {
    case Method::kThreshold: {
      require(config.f_calibration.has_value(), ErrorKind::kCalibration,
              "the threshold method needs a bright-state calibration");
      const ThresholdSpec spec = choose_threshold(g, *config.f_calibration);
      for (std::size_t j = 0; j < n_points; ++j) {
        const double l = estimate_threshold(data.records[j].counts, spec);
        result.points[j].l = l;
        result.points[j].sd = std::sqrt(l * (1.0 - l) / static_cast<double>(data.records[j].size()));
      }
      break;
    }
    case Method::kEmExact:
    case Method::kEmNetwork: {
      const bool network = method == Method::kEmNetwork;
      require(!network || config.network != nullptr, ErrorKind::kConfig,
              "network EM requested but no trained weights were loaded");
      if (config.shared_bright) {
        const SharedEmResult em = network
                                      ? run_shared_em_network(data.records, g, config.prior, config.em, config.network)
                                      : run_shared_em(data.records, g, config.prior, config.em);
        for (std::size_t j = 0; j < n_points; ++j) {
          result.points[j].l = em.posteriors[j].mean;
          result.points[j].sd = em.posteriors[j].sd;
        }
        result.theta_f = em.theta_f;
        result.em_iterations = em.trace.iterations_used;
        result.em_converged = em.trace.converged;
        result.degenerate_bright = em.trace.degenerate_bright;
      } else {
        result.em_converged = true;
        for (std::size_t j = 0; j < n_points; ++j) {
          const EmResult em = network ? run_em_network(data.records[j], g, config.prior, config.em, config.network)
                                      : run_em(data.records[j], g, config.prior, config.em);
          result.points[j].l = em.posterior.mean;
          result.points[j].sd = em.posterior.sd;
          result.theta_f = em.theta_f;
          result.em_iterations = std::max(result.em_iterations, em.trace.iterations_used);
          result.em_converged = result.em_converged && em.trace.converged;
          result.degenerate_bright = result.degenerate_bright || em.trace.degenerate_bright;
        }
      }
      break;
    }
  }

  if (!data.reference.empty()) {
    double total = 0.0;
    for (std::size_t j = 0; j < n_points; ++j) {
      PointEstimate& p = result.points[j];
      p.reference = data.reference[j];
      p.fidelity = fidelity(std::clamp(p.reference, 0.0, 1.0), std::clamp(p.l, 0.0, 1.0));
      total += p.fidelity;
    }
    result.mean_fidelity = total / static_cast<double>(n_points);
  }

  if (config.fit_model) {
    std::vector<FitPoint> pts;
    for (const PointEstimate& p : result.points) pts.push_back({p.t, p.l, method == Method::kThreshold ? 0.0 : p.sd});
    try {
      if (data.kind == ExperimentKind::kRabi) {
        result.rabi = fit_rabi(pts, config.fit);
      } else {
        result.ramsey = fit_ramsey(pts, config.fit);
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kDegenerate && e.kind() != ErrorKind::kDomain) throw;
      result.fit_error = e.what();
    }
  }
  return result;
}

std::vector<ExperimentResult> compare_methods(const ExperimentData& data, const SuperPoissonParams& g,
                                              const CompareConfig& config) {
  for (Method m : config.methods) {
    require(m != Method::kEmNetwork || config.network != nullptr, ErrorKind::kConfig,
            "network EM requested but no trained weights were loaded");
  }
  std::vector<ExperimentResult> out;
  for (Method m : config.methods) {
    if (m == Method::kThreshold && !config.f_calibration) continue;
    out.push_back(run_method(data, g, m, config));
  }
  return out;
}

}  // namespace photoread
