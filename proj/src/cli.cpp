#include "photoread/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "photoread/benchmark.hpp"
#include "photoread/config.hpp"
#include "photoread/error.hpp"
#include "photoread/experiments.hpp"
#include "photoread/fixtures.hpp"
#include "photoread/network_em.hpp"
#include "photoread/network_io.hpp"
#include "photoread/parallel.hpp"
#include "photoread/rng.hpp"
#include "photoread/shot_io.hpp"
#include "photoread/threshold_readout.hpp"
#include "photoread/training.hpp"

namespace photoread {
namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

ordered_json params_json(const SuperPoissonParams& p) { return {{"alpha", p.alpha}, {"beta", p.beta}}; }

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(file), ErrorKind::kData, "cannot open '" + path + "' for writing");
  file << text;
  require(static_cast<bool>(file), ErrorKind::kData, "failed writing '" + path + "'");
}

std::string json_text(const ordered_json& j) { return j.dump(2) + "\n"; }

void check_format(const std::string& format) {
  require(format == "json" || format == "csv", ErrorKind::kConfig, "--format must be csv or json");
}

RunConfig config_or_default(const std::string& path) {
  return path.empty() ? parse_config("{}") : load_config(path);
}

std::optional<Network> load_network(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return Network(load_weights(path));
}

// --- simulate ---------------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  RunConfig cfg = load_config(a.config);
  if (a.seed) {
    cfg.seed = *a.seed;
    cfg.source["seed"] = *a.seed;
  }
  require(cfg.g.has_value() && cfg.f.has_value(), ErrorKind::kConfig,
          "simulate needs both 'g' and 'f' in the config");
  require(!a.out.empty(), ErrorKind::kConfig, "simulate needs --out");
  const SuperPoissonParams g = *cfg.g;
  const SuperPoissonParams f = *cfg.f;

  ShotFile base;
  base.exposure_tag = cfg.exposure_tag;
  base.calib_g = g;
  base.calib_f = f;
  base.config_echo = cfg.echo();

  ordered_json written = ordered_json::array();
  if (cfg.experiment) {
    const ExperimentSpec& spec = *cfg.experiment;
    std::vector<double> times = spec.times;
    if (times.empty()) times = spec.kind == ExperimentKind::kRabi ? rabi_times() : ramsey_times();
    auto l_of = [&](double t) {
      return spec.kind == ExperimentKind::kRabi ? spec.rabi.occupation(t) : spec.ramsey.occupation(t);
    };
    fs::create_directories(a.out);
    for (std::size_t j = 0; j < times.size(); ++j) {
      const double l = l_of(times[j]);
      require(l >= 0.0 && l <= 1.0, ErrorKind::kConfig,
              "experiment occupation " + format_real(l) + " at t = " + format_real(times[j]) + " is outside [0, 1]");
      ShotFile file = base;
      file.time = times[j];
      for (std::size_t r = 0; r < cfg.rois; ++r) {
        ShotRecord rec = sample(MixtureModel{g, f, l}, cfg.n_shots, derive_seed(derive_seed(cfg.seed, j), r));
        rec.roi_id = "roi" + std::to_string(r);
        file.records.push_back(std::move(rec));
        file.reference.push_back(l);
      }
      char name[32];
      std::snprintf(name, sizeof(name), "point_%02zu.csv", j);
      const fs::path path = fs::path(a.out) / name;
      save_shot_file(file, path);
      written.push_back({{"file", path.string()}, {"time", times[j]}, {"l_true", l}});
    }
  } else {
    ShotFile file = base;
    for (std::size_t r = 0; r < cfg.rois; ++r) {
      ShotRecord rec = sample(MixtureModel{g, f, cfg.l}, cfg.n_shots, derive_seed(cfg.seed, r));
      rec.roi_id = "roi" + std::to_string(r);
      file.records.push_back(std::move(rec));
      file.reference.push_back(cfg.l);
    }
    save_shot_file(file, a.out);
    written.push_back({{"file", a.out}, {"l_true", cfg.l}});
  }
  out << json_text({{"command", "simulate"}, {"seed", cfg.seed}, {"written", written}});
  return 0;
}

// --- infer ------------------------------------------------------------------------

struct InferArgs {
  std::string shots;
  std::string method = "em";
  std::string weights;
  std::string config;
  std::string out;
  std::string format = "json";
  std::optional<std::size_t> grid;
};

int cmd_infer(const InferArgs& a, std::ostream& out) {
  check_format(a.format);
  const Method method = method_from_string(a.method);
  const ShotFile file = load_shot_file(a.shots);
  require(file.calib_g.has_value(), ErrorKind::kCalibration,
          "shot file has no '# calib_g:' dark-state calibration; inference requires it");
  RunConfig cfg = config_or_default(a.config);
  if (a.grid) cfg.em.grid_size = *a.grid;
  const SuperPoissonParams g = *file.calib_g;
  std::optional<Network> net;
  if (method == Method::kEmNetwork) {
    require(!a.weights.empty(), ErrorKind::kConfig, "method em-net needs --weights");
    net = load_network(a.weights);
  }
  std::optional<ThresholdSpec> spec;
  if (method == Method::kThreshold) {
    require(file.calib_f.has_value(), ErrorKind::kCalibration,
            "the threshold method needs a '# calib_f:' bright-state calibration");
    spec = choose_threshold(g, *file.calib_f);
  }

  ordered_json rows = ordered_json::array();
  std::ostringstream csv;
  csv << "roi_id,n,method,l,sd,iterations,converged,degenerate_bright,alpha_f,beta_f,reference,fidelity\n";
  for (std::size_t j = 0; j < file.records.size(); ++j) {
    const ShotRecord& rec = file.records[j];
    require(!rec.empty(), ErrorKind::kDomain, "ROI '" + rec.roi_id + "' has an empty shot list");
    ordered_json row{{"roi_id", rec.roi_id}, {"n", rec.size()}, {"method", std::string(to_string(method))}};
    double l = 0.0, sd = 0.0;
    int iterations = 0;
    bool converged = true, degenerate = false;
    SuperPoissonParams theta_f{};
    if (method == Method::kThreshold) {
      l = estimate_threshold(rec.counts, *spec);
      sd = std::sqrt(l * (1.0 - l) / static_cast<double>(rec.size()));
      row["n_th"] = spec->n_th;
      theta_f = *file.calib_f;
    } else {
      const EmResult em = method == Method::kEmExact ? run_em(rec, g, PriorSpec::uniform(), cfg.em)
                                                     : run_em_network(rec, g, PriorSpec::uniform(), cfg.em, &*net);
      l = em.posterior.mean;
      sd = em.posterior.sd;
      iterations = em.trace.iterations_used;
      converged = em.trace.converged;
      degenerate = em.trace.degenerate_bright;
      theta_f = em.theta_f;
    }
    row["l"] = l;
    row["sd"] = sd;
    row["iterations"] = iterations;
    row["converged"] = converged;
    row["degenerate_bright"] = degenerate;
    row["theta_f"] = params_json(theta_f);
    csv << rec.roi_id << ',' << rec.size() << ',' << to_string(method) << ',' << format_real(l) << ','
        << format_real(sd) << ',' << iterations << ',' << (converged ? 1 : 0) << ',' << (degenerate ? 1 : 0) << ','
        << format_real(theta_f.alpha) << ',' << format_real(theta_f.beta) << ',';
    if (!file.reference.empty()) {
      const double ref = file.reference[j];
      const double fid = fidelity(std::clamp(ref, 0.0, 1.0), std::clamp(l, 0.0, 1.0));
      row["reference"] = ref;
      row["fidelity"] = fid;
      csv << format_real(ref) << ',' << format_real(fid);
    } else {
      csv << ',';
    }
    csv << '\n';
    rows.push_back(row);
  }
  if (a.format == "csv") {
    emit(a.out, csv.str(), out);
  } else {
    ordered_json doc{{"command", "infer"},
                     {"method", std::string(to_string(method))},
                     {"exposure_tag", file.exposure_tag},
                     {"calib_g", params_json(g)},
                     {"grid", method == Method::kEmNetwork ? net->arch().grid_size : cfg.em.grid_size},
                     {"rois", rows}};
    emit(a.out, json_text(doc), out);
  }
  return 0;
}

// --- train / eval -----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string out;
  std::string report;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> tasks;
  std::optional<int> epochs;
  bool quiet = false;
};

ordered_json kl_json(const KlReport& r) {
  return {{"tasks", r.tasks}, {"median_kl", r.median}, {"p95_kl", r.p95}, {"mean_kl", r.mean}, {"max_kl", r.max}};
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig cfg = config_or_default(a.config);
  require(!a.out.empty(), ErrorKind::kConfig, "train needs --out for the weight file");
  const std::uint64_t seed = a.seed.value_or(cfg.seed);
  const std::size_t size = a.tasks.value_or(cfg.train_size);
  if (a.epochs) cfg.optimizer.epochs = *a.epochs;
  cfg.optimizer.verbose = false;

  const TrainingSet data = generate_training_set(cfg.ranges, size, seed, cfg.arch.grid_size);
  const TrainingOutcome trained = train(data, cfg.arch, cfg.optimizer, seed, [&](const EpochStats& s) {
    if (!a.quiet) {
      err << "epoch " << s.epoch << " train_kl " << format_real(s.train_loss) << " val_kl "
          << format_real(s.validation_kl) << '\n';
    }
  });
  save_weights(trained.weights, a.out);

  ordered_json epochs = ordered_json::array();
  for (const EpochStats& s : trained.report.epochs) {
    epochs.push_back({{"epoch", s.epoch},
                      {"learning_rate", s.learning_rate},
                      {"train_kl", s.train_loss},
                      {"validation_kl", s.validation_kl}});
  }
  ordered_json doc{{"command", "train"},
                   {"weights", a.out},
                   {"seed", seed},
                   {"tasks", size},
                   {"parameters", trained.weights.parameter_count()},
                   {"initial_train_kl", trained.report.initial_train_loss},
                   {"best_epoch", trained.report.best_epoch},
                   {"best_validation_kl", trained.report.best_validation_kl},
                   {"epochs", epochs}};
  emit(a.report, json_text(doc), out);
  return 0;
}

struct EvalArgs {
  std::string weights;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> tasks;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const RunConfig cfg = config_or_default(a.config);
  const Network net(load_weights(a.weights));
  const std::uint64_t seed = a.seed.value_or(cfg.eval_seed);
  const TrainingSet data =
      generate_training_set(cfg.ranges, a.tasks.value_or(cfg.eval_tasks), seed, net.arch().grid_size);
  const KlReport r = evaluate(net, data);
  ordered_json doc = kl_json(r);
  doc["command"] = "eval";
  doc["seed"] = seed;
  doc["weights_validation_kl"] = net.weights().meta.validation_kl;
  emit(a.out, json_text(doc), out);
  return 0;
}

// --- benchmark --------------------------------------------------------------------

struct BenchArgs {
  std::string weights;
  std::vector<std::size_t> ns{100, 200, 500, 1000, 2000, 5000};
  int iterations = 10;
  int repeats = 5;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "json";
};

int cmd_benchmark(const BenchArgs& a, std::ostream& out) {
  check_format(a.format);
  const Network net(load_weights(a.weights));
  BenchmarkConfig bc;
  bc.ns = a.ns;
  bc.iterations = a.iterations;
  bc.repeats = a.repeats;
  bc.seed = a.seed;
  const BenchmarkReport r = run_benchmark(net, bc);

  std::ostringstream csv;
  csv << "n,exact_seconds,network_seconds,histogram_seconds,speedup,exact_mean,network_mean\n";
  ordered_json rows = ordered_json::array();
  for (const BenchmarkRow& row : r.rows) {
    csv << row.n << ',' << format_real(row.exact_seconds) << ',' << format_real(row.network_seconds) << ','
        << format_real(row.histogram_seconds) << ',' << format_real(row.speedup) << ',' << format_real(row.exact_mean)
        << ',' << format_real(row.network_mean) << '\n';
    rows.push_back({{"n", row.n},
                    {"exact_seconds", row.exact_seconds},
                    {"network_seconds", row.network_seconds},
                    {"histogram_seconds", row.histogram_seconds},
                    {"speedup", row.speedup},
                    {"exact_mean", row.exact_mean},
                    {"network_mean", row.network_mean}});
  }
  ordered_json doc{{"command", "benchmark"},
                   {"iterations", r.iterations},
                   {"repeats", r.repeats},
                   {"environment", r.environment},
                   {"exact_r2", r.exact_r2},
                   {"network_r2", r.network_r2},
                   {"slope_ratio", r.slope_ratio},
                   {"speedup_at_largest_n", r.rows.back().speedup},
                   {"published_speedup", BenchmarkReport::kPublishedSpeedup},
                   {"rows", rows}};
  if (!a.out.empty()) {
    emit(a.out + ".csv", csv.str(), out);
    emit(a.out + ".json", json_text(doc), out);
  }
  out << (a.format == "csv" ? csv.str() : json_text(doc));
  return 0;
}

// --- experiment / compare ---------------------------------------------------------

ordered_json fit_json(const ExperimentResult& r) {
  if (r.rabi) {
    return {{"omega_hz", r.rabi->model.omega / (2.0 * std::numbers::pi)},
            {"amplitude", r.rabi->model.amplitude},
            {"residual_norm", r.rabi->residual_norm}};
  }
  if (r.ramsey) {
    const RamseyModel& m = r.ramsey->model;
    return {{"t2", m.t2()},
            {"sigma", m.sigma},
            {"delta_omega_hz", m.delta_omega / (2.0 * std::numbers::pi)},
            {"phi", m.phi},
            {"l0", m.l0},
            {"amp", m.amp},
            {"residual_norm", r.ramsey->residual_norm}};
  }
  return {{"error", r.fit_error}};
}

ordered_json result_json(const ExperimentResult& r) {
  ordered_json pts = ordered_json::array();
  for (const PointEstimate& p : r.points) {
    pts.push_back({{"t", p.t}, {"l", p.l}, {"sd", p.sd}, {"reference", p.reference}, {"fidelity", p.fidelity}});
  }
  ordered_json j{{"method", std::string(to_string(r.method))},
                 {"mean_fidelity", r.mean_fidelity},
                 {"fit", fit_json(r)},
                 {"points", pts}};
  if (r.method != Method::kThreshold) {
    j["theta_f"] = params_json(r.theta_f);
    j["em_iterations"] = r.em_iterations;
    j["em_converged"] = r.em_converged;
    j["degenerate_bright"] = r.degenerate_bright;
  }
  return j;
}

void results_csv(std::ostream& csv, const std::vector<ExperimentResult>& results, const std::string& prefix) {
  for (const ExperimentResult& r : results) {
    for (const PointEstimate& p : r.points) {
      csv << prefix << to_string(r.method) << ',' << format_real(p.t) << ',' << format_real(p.l) << ','
          << format_real(p.sd) << ',' << format_real(p.reference) << ',' << format_real(p.fidelity) << '\n';
    }
  }
}

struct ExperimentArgs {
  std::string kind;
  std::string config;
  std::string weights;
  std::string out;
  std::string format = "json";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> seeds;
};

int cmd_experiment(const ExperimentArgs& a, std::ostream& out) {
  check_format(a.format);
  const ExperimentKind kind = experiment_kind_from_string(a.kind);
  const RunConfig cfg = config_or_default(a.config);
  const SuperPoissonParams g = cfg.g.value_or(fixtures::kOverlap061.g);
  const SuperPoissonParams f = cfg.f.value_or(fixtures::kOverlap061.f);
  ExperimentSpec spec = cfg.experiment.value_or(ExperimentSpec{});
  require(!cfg.experiment || spec.kind == kind, ErrorKind::kConfig,
          "config experiment kind does not match the command");
  spec.kind = kind;
  if (kind == ExperimentKind::kRamsey && !cfg.experiment) {
    spec.ramsey = {RamseyModel::sigma_from_t2(6.43e-3), 2.0 * std::numbers::pi * 767.0, 0.0, 0.5, 0.5};
  }
  std::vector<double> times = spec.times;
  if (times.empty()) times = kind == ExperimentKind::kRabi ? rabi_times() : ramsey_times();

  const std::optional<Network> net = load_network(a.weights);
  CompareConfig cc;
  cc.em = cfg.em;
  cc.shared_bright = cfg.shared_bright;
  cc.f_calibration = f;
  cc.network = net ? &*net : nullptr;
  cc.methods = {Method::kThreshold, Method::kEmExact};
  if (net) cc.methods.push_back(Method::kEmNetwork);

  const std::uint64_t seed = a.seed.value_or(cfg.seed);
  const std::size_t seeds = a.seeds.value_or(cfg.seeds);
  std::vector<std::vector<ExperimentResult>> all;
  std::ostringstream csv;
  csv << "seed,method,t,l,sd,reference,fidelity\n";
  for (std::size_t s = 0; s < seeds; ++s) {
    const std::uint64_t run_seed = derive_seed(seed, s);
    ExperimentData data;
    data.kind = kind;
    data.times = times;
    data.records = kind == ExperimentKind::kRabi ? generate_experiment(spec.rabi, times, cfg.n_shots, g, f, run_seed)
                                                 : generate_experiment(spec.ramsey, times, cfg.n_shots, g, f, run_seed);
    for (double t : times) {
      data.reference.push_back(kind == ExperimentKind::kRabi ? spec.rabi.occupation(t) : spec.ramsey.occupation(t));
    }
    all.push_back(compare_methods(data, g, cc));
    results_csv(csv, all.back(), std::to_string(s) + ",");
  }

  ordered_json methods = ordered_json::object();
  for (std::size_t m = 0; m < all.front().size(); ++m) {
    std::vector<double> fids, freq, t2;
    ordered_json runs = ordered_json::array();
    for (std::size_t s = 0; s < seeds; ++s) {
      const ExperimentResult& r = all[s][m];
      fids.push_back(r.mean_fidelity);
      if (r.rabi) freq.push_back(r.rabi->model.omega / (2.0 * std::numbers::pi));
      if (r.ramsey) {
        freq.push_back(r.ramsey->model.delta_omega / (2.0 * std::numbers::pi));
        t2.push_back(r.ramsey->model.t2());
      }
      runs.push_back(result_json(r));
    }
    double mean = 0.0;
    for (double v : fids) mean += v;
    ordered_json summary{{"mean_fidelity", mean / static_cast<double>(fids.size())}};
    if (!freq.empty()) summary["median_frequency_hz"] = quantile(freq, 0.5);
    if (!t2.empty()) summary["median_t2"] = quantile(t2, 0.5);
    summary["runs"] = runs;
    methods[std::string(to_string(all.front()[m].method))] = summary;
  }
  ordered_json truth = kind == ExperimentKind::kRabi
                           ? ordered_json{{"omega_hz", spec.rabi.omega / (2.0 * std::numbers::pi)},
                                          {"amplitude", spec.rabi.amplitude}}
                           : ordered_json{{"t2", spec.ramsey.t2()},
                                          {"delta_omega_hz", spec.ramsey.delta_omega / (2.0 * std::numbers::pi)},
                                          {"phi", spec.ramsey.phi},
                                          {"l0", spec.ramsey.l0},
                                          {"amp", spec.ramsey.amp}};
  ordered_json doc{{"command", "experiment"},
                   {"kind", std::string(to_string(kind))},
                   {"seed", seed},
                   {"seeds", seeds},
                   {"n_shots", cfg.n_shots},
                   {"g", params_json(g)},
                   {"f", params_json(f)},
                   {"overlap", overlap(f, g)},
                   {"truth", truth},
                   {"times", times},
                   {"methods", methods}};
  if (!a.out.empty()) {
    emit(a.out + ".csv", csv.str(), out);
    emit(a.out + ".json", json_text(doc), out);
  }
  out << (a.format == "csv" ? csv.str() : json_text(doc));
  return 0;
}

struct CompareArgs {
  std::vector<std::string> files;
  std::string kind = "rabi";
  std::string weights;
  std::string config;
  std::string out;
  std::string format = "json";
  std::size_t roi = 0;
};

int cmd_compare(const CompareArgs& a, std::ostream& out) {
  check_format(a.format);
  const RunConfig cfg = config_or_default(a.config);
  ExperimentData data;
  data.kind = experiment_kind_from_string(a.kind);
  std::optional<SuperPoissonParams> g, f;
  bool have_reference = true;
  std::vector<std::pair<double, std::size_t>> order;
  std::vector<ShotFile> files;
  for (const std::string& path : a.files) {
    files.push_back(load_shot_file(path));
    const ShotFile& file = files.back();
    require(file.time.has_value(), ErrorKind::kData, "'" + path + "' has no '# time:' header");
    require(a.roi < file.records.size(), ErrorKind::kConfig, "--roi is out of range for '" + path + "'");
    require(file.calib_g.has_value(), ErrorKind::kCalibration, "'" + path + "' has no dark-state calibration");
    require(!g || *g == *file.calib_g, ErrorKind::kData, "shot files disagree on the dark-state calibration");
    g = file.calib_g;
    if (file.calib_f) f = file.calib_f;
    have_reference = have_reference && !file.reference.empty();
    order.emplace_back(*file.time, files.size() - 1);
  }
  std::sort(order.begin(), order.end());
  for (const auto& [t, idx] : order) {
    data.times.push_back(t);
    data.records.push_back(files[idx].records[a.roi]);
    if (have_reference) data.reference.push_back(files[idx].reference[a.roi]);
  }
  const std::optional<Network> net = load_network(a.weights);
  CompareConfig cc;
  cc.em = cfg.em;
  cc.shared_bright = cfg.shared_bright;
  cc.f_calibration = f;
  cc.network = net ? &*net : nullptr;
  cc.methods = {Method::kThreshold, Method::kEmExact};
  if (net) cc.methods.push_back(Method::kEmNetwork);
  const std::vector<ExperimentResult> results = compare_methods(data, *g, cc);

  if (a.format == "csv") {
    std::ostringstream csv;
    csv << "method,t,l,sd,reference,fidelity\n";
    results_csv(csv, results, "");
    emit(a.out, csv.str(), out);
  } else {
    ordered_json arr = ordered_json::array();
    for (const ExperimentResult& r : results) arr.push_back(result_json(r));
    emit(a.out, json_text({{"command", "compare"}, {"kind", a.kind}, {"results", arr}}), out);
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"photoread: Bayesian and amortised inference of qubit occupation from photon counts"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "OpenMP threads (1 is the reproducibility baseline)")->check(CLI::PositiveNumber);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Write synthetic shot files from a config");
  c_sim->add_option("--config", sim.config, "JSON run config")->required();
  c_sim->add_option("--out", sim.out, "Output file, or directory for experiment configs")->required();
  c_sim->add_option("--seed", sim.seed, "Override the config seed");

  InferArgs inf;
  auto* c_inf = app.add_subcommand("infer", "Estimate the bright-state occupation per ROI");
  c_inf->add_option("shots", inf.shots, "Shot file")->required();
  c_inf->add_option("--method", inf.method, "threshold | em | em-net");
  c_inf->add_option("--weights", inf.weights, "Network weight file (em-net)");
  c_inf->add_option("--config", inf.config, "JSON run config (EM options)");
  c_inf->add_option("--grid", inf.grid, "Grid size for the exact E-step");
  c_inf->add_option("--out", inf.out, "Output path (default stdout)");
  c_inf->add_option("--format", inf.format, "csv | json");

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train the amortised posterior network");
  c_tr->add_option("--config", tr.config, "JSON run config (training section)");
  c_tr->add_option("--out", tr.out, "Weight file to write")->required();
  c_tr->add_option("--report", tr.report, "Training report path (default stdout)");
  c_tr->add_option("--seed", tr.seed, "Override the config seed");
  c_tr->add_option("--tasks", tr.tasks, "Override the training-set size");
  c_tr->add_option("--epochs", tr.epochs, "Override the epoch count");
  c_tr->add_flag("--quiet", tr.quiet, "No per-epoch progress on stderr");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "KL(exact || network) on fresh simulated tasks");
  c_ev->add_option("--weights", ev.weights, "Network weight file")->required();
  c_ev->add_option("--config", ev.config, "JSON run config (training ranges, eval section)");
  c_ev->add_option("--seed", ev.seed, "Task seed");
  c_ev->add_option("--tasks", ev.tasks, "Number of tasks");
  c_ev->add_option("--out", ev.out, "Output path (default stdout)");

  BenchArgs be;
  auto* c_be = app.add_subcommand("benchmark", "Time exact-EM against network-EM over sample sizes");
  c_be->add_option("--weights", be.weights, "Network weight file")->required();
  c_be->add_option("--ns", be.ns, "Sample sizes")->delimiter(',');
  c_be->add_option("--iterations", be.iterations, "EM iterations per task");
  c_be->add_option("--repeats", be.repeats, "Timed repeats per N");
  c_be->add_option("--seed", be.seed, "Data seed");
  c_be->add_option("--out", be.out, "Output prefix for .csv and .json");
  c_be->add_option("--format", be.format, "csv | json for stdout");

  ExperimentArgs ex;
  auto* c_ex = app.add_subcommand("experiment", "Simulate and analyse a Rabi or Ramsey experiment");
  c_ex->add_option("kind", ex.kind, "rabi | ramsey")->required();
  c_ex->add_option("--config", ex.config, "JSON run config");
  c_ex->add_option("--weights", ex.weights, "Network weight file (adds em_network)");
  c_ex->add_option("--seed", ex.seed, "Override the config seed");
  c_ex->add_option("--seeds", ex.seeds, "Number of repetitions");
  c_ex->add_option("--out", ex.out, "Output prefix for .csv and .json");
  c_ex->add_option("--format", ex.format, "csv | json for stdout");

  CompareArgs co;
  auto* c_co = app.add_subcommand("compare", "Run every method on a set of per-time-point shot files");
  c_co->add_option("files", co.files, "Shot files with '# time:' headers")->required();
  c_co->add_option("--kind", co.kind, "rabi | ramsey (model to fit)");
  c_co->add_option("--weights", co.weights, "Network weight file (adds em_network)");
  c_co->add_option("--config", co.config, "JSON run config (EM options)");
  c_co->add_option("--roi", co.roi, "ROI index within each file");
  c_co->add_option("--out", co.out, "Output path (default stdout)");
  c_co->add_option("--format", co.format, "csv | json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : exit_code(ErrorKind::kConfig);
  }

  try {
    par::set_threads(threads);
    if (c_sim->parsed()) return cmd_simulate(sim, out);
    if (c_inf->parsed()) return cmd_infer(inf, out);
    if (c_tr->parsed()) return cmd_train(tr, out, err);
    if (c_ev->parsed()) return cmd_eval(ev, out);
    if (c_be->parsed()) return cmd_benchmark(be, out);
    if (c_ex->parsed()) return cmd_experiment(ex, out);
    if (c_co->parsed()) return cmd_compare(co, out);
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error [data]: " << e.what() << '\n';
    return exit_code(ErrorKind::kData);
  }
  return 1;
}

}  // namespace photoread
