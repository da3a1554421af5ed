#include "photoread/config.hpp"

#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "photoread/error.hpp"

namespace photoread {
namespace {

using nlohmann::json;

[[noreturn]] void bad_field(const std::string& path, const std::string& msg) {
  fail(ErrorKind::kConfig, "config field '" + path + "': " + msg);
}

void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) bad_field(path.empty() ? "<root>" : path, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) bad_field(path.empty() ? item.key() : path + "." + item.key(), "unknown key");
  }
}

std::string join(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }

template <typename T>
void read(const json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    bad_field(join(path, key), "has the wrong type");
  }
}

double read_real(const json& j, const std::string& path, const char* key, double fallback, double lo, double hi) {
  double v = fallback;
  if (j.contains(key) && !j.at(key).is_number()) bad_field(join(path, key), "expected a number");
  read(j, path, key, v);
  if (!(v >= lo && v <= hi)) {
    std::ostringstream msg;
    msg << "value " << v << " is outside [" << lo << ", " << hi << "]";
    bad_field(join(path, key), msg.str());
  }
  return v;
}

std::size_t read_count(const json& j, const std::string& path, const char* key, std::size_t fallback, std::size_t lo) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer() || j.at(key).get<long long>() < static_cast<long long>(lo)) {
    bad_field(join(path, key), "expected an integer >= " + std::to_string(lo));
  }
  return j.at(key).get<std::size_t>();
}

SuperPoissonParams read_params(const json& j, const std::string& path) {
  only_keys(j, path, {"alpha", "beta"});
  if (!j.contains("alpha") || !j.contains("beta")) bad_field(path, "needs both alpha and beta");
  const double inf = std::numeric_limits<double>::infinity();
  return {read_real(j, path, "alpha", 1.0, 1e-300, inf), read_real(j, path, "beta", 1.0, 1e-300, inf)};
}

std::vector<std::size_t> read_widths(const json& j, const std::string& path, const char* key,
                                     std::vector<std::size_t> fallback) {
  if (!j.contains(key)) return fallback;
  std::vector<std::size_t> w;
  read(j, path, key, w);
  if (w.empty()) bad_field(join(path, key), "needs at least one layer");
  for (std::size_t v : w) {
    if (v < 1) bad_field(join(path, key), "widths must be >= 1");
  }
  return w;
}

ExperimentSpec read_experiment(const json& j) {
  const std::string path = "experiment";
  if (!j.is_object() || !j.contains("kind")) bad_field(path, "needs a 'kind' of rabi or ramsey");
  ExperimentSpec spec;
  std::string kind;
  read(j, path, "kind", kind);
  try {
    spec.kind = experiment_kind_from_string(kind);
  } catch (const Error&) {
    bad_field(join(path, "kind"), "must be rabi or ramsey");
  }
  const double inf = std::numeric_limits<double>::infinity();
  const double two_pi = 2.0 * std::numbers::pi;
  if (spec.kind == ExperimentKind::kRabi) {
    only_keys(j, path, {"kind", "omega_hz", "amplitude", "times"});
    spec.rabi.omega = two_pi * read_real(j, path, "omega_hz", 25.1e3, 1e-300, inf);
    spec.rabi.amplitude = read_real(j, path, "amplitude", 0.87, 0.0, 1.0);
  } else {
    only_keys(j, path, {"kind", "t2", "delta_omega_hz", "phi", "l0", "amp", "times"});
    spec.ramsey.sigma = RamseyModel::sigma_from_t2(read_real(j, path, "t2", 6.43e-3, 1e-300, inf));
    spec.ramsey.delta_omega = two_pi * read_real(j, path, "delta_omega_hz", 767.0, 0.0, inf);
    spec.ramsey.phi = read_real(j, path, "phi", 0.0, -inf, inf);
    spec.ramsey.l0 = read_real(j, path, "l0", 0.5, 0.0, 1.0);
    spec.ramsey.amp = read_real(j, path, "amp", 0.5, 0.0, 1.0);
  }
  read(j, path, "times", spec.times);
  for (std::size_t k = 0; k < spec.times.size(); ++k) {
    if (!(spec.times[k] >= 0.0) || (k > 0 && !(spec.times[k] > spec.times[k - 1]))) {
      bad_field(join(path, "times"), "must be non-negative and strictly increasing");
    }
  }
  return spec;
}

}  // namespace

std::string RunConfig::echo() const { return source.dump(); }

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  only_keys(root, "", {"seed", "g", "f", "l", "n_shots", "rois", "exposure_tag", "experiment", "em", "grid", "seeds",
                       "training", "eval"});
  RunConfig c;
  c.source = root;
  const double inf = std::numeric_limits<double>::infinity();

  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned()) bad_field("seed", "expected a non-negative integer");
    c.seed = root["seed"].get<std::uint64_t>();
  }
  if (root.contains("g")) c.g = read_params(root["g"], "g");
  if (root.contains("f")) c.f = read_params(root["f"], "f");
  if (c.g && c.f && !(c.f->mean() > c.g->mean())) bad_field("f", "bright mean must exceed the dark mean");
  c.l = read_real(root, "", "l", c.l, 0.0, 1.0);
  c.n_shots = read_count(root, "", "n_shots", c.n_shots, 1);
  c.rois = read_count(root, "", "rois", c.rois, 1);
  read(root, "", "exposure_tag", c.exposure_tag);
  if (c.exposure_tag.find('\n') != std::string::npos) bad_field("exposure_tag", "must be a single line");
  if (root.contains("experiment")) c.experiment = read_experiment(root["experiment"]);
  c.grid = read_count(root, "", "grid", c.grid, 2);
  c.em.grid_size = c.grid;
  c.seeds = read_count(root, "", "seeds", c.seeds, 1);

  if (root.contains("em")) {
    const json& em = root["em"];
    only_keys(em, "em", {"max_iter", "tol_theta", "tol_mean", "init_f", "shared_bright"});
    c.em.max_iter = static_cast<int>(read_count(em, "em", "max_iter", 50, 1));
    c.em.tol_theta = read_real(em, "em", "tol_theta", c.em.tol_theta, 1e-300, inf);
    c.em.tol_mean = read_real(em, "em", "tol_mean", c.em.tol_mean, 1e-300, inf);
    if (em.contains("init_f")) c.em.init_f = read_params(em["init_f"], "em.init_f");
    read(em, "em", "shared_bright", c.shared_bright);
  }

  if (root.contains("training")) {
    const json& t = root["training"];
    const std::string p = "training";
    only_keys(t, p, {"size", "alpha_min", "alpha_max", "beta_min", "beta_max", "n_min", "n_max",
                     "near_anchor_fraction", "batch_size", "learning_rate", "epochs", "validation_fraction",
                     "patience", "final_lr_fraction", "encoder_widths", "head_widths", "grid_size", "activation",
                     "count_scaled_readout"});
    c.train_size = read_count(t, p, "size", c.train_size, 2);
    c.ranges.alpha_min = read_real(t, p, "alpha_min", c.ranges.alpha_min, 1e-300, inf);
    c.ranges.alpha_max = read_real(t, p, "alpha_max", c.ranges.alpha_max, 1e-300, inf);
    c.ranges.beta_min = read_real(t, p, "beta_min", c.ranges.beta_min, 1e-300, inf);
    c.ranges.beta_max = read_real(t, p, "beta_max", c.ranges.beta_max, 1e-300, inf);
    c.ranges.n_min = read_count(t, p, "n_min", c.ranges.n_min, 1);
    c.ranges.n_max = read_count(t, p, "n_max", c.ranges.n_max, 1);
    c.ranges.near_anchor_fraction = read_real(t, p, "near_anchor_fraction", c.ranges.near_anchor_fraction, 0.0, 1.0);
    c.optimizer.batch_size = read_count(t, p, "batch_size", c.optimizer.batch_size, 1);
    c.optimizer.learning_rate = read_real(t, p, "learning_rate", c.optimizer.learning_rate, 1e-300, inf);
    c.optimizer.epochs = static_cast<int>(read_count(t, p, "epochs", static_cast<std::size_t>(c.optimizer.epochs), 1));
    c.optimizer.validation_fraction =
        read_real(t, p, "validation_fraction", c.optimizer.validation_fraction, 1e-9, 1.0 - 1e-9);
    c.optimizer.patience =
        static_cast<int>(read_count(t, p, "patience", static_cast<std::size_t>(c.optimizer.patience), 1));
    c.optimizer.final_lr_fraction = read_real(t, p, "final_lr_fraction", c.optimizer.final_lr_fraction, 1e-9, 1.0);
    c.arch.encoder_widths = read_widths(t, p, "encoder_widths", c.arch.encoder_widths);
    c.arch.head_widths = read_widths(t, p, "head_widths", c.arch.head_widths);
    c.arch.grid_size = read_count(t, p, "grid_size", c.arch.grid_size, 2);
    if (t.contains("activation")) {
      std::string a;
      read(t, p, "activation", a);
      try {
        c.arch.activation = activation_from_string(a);
      } catch (const Error&) {
        bad_field("training.activation", "must be tanh or algebraic");
      }
    }
    read(t, p, "count_scaled_readout", c.arch.count_scaled_readout);
    try {
      c.ranges.validate();
    } catch (const Error& e) {
      bad_field("training", e.what());
    }
  }
  if (root.contains("eval")) {
    const json& e = root["eval"];
    only_keys(e, "eval", {"tasks", "seed"});
    c.eval_tasks = read_count(e, "eval", "tasks", c.eval_tasks, 1);
    if (e.contains("seed")) {
      if (!e["seed"].is_number_unsigned()) bad_field("eval.seed", "expected a non-negative integer");
      c.eval_seed = e["seed"].get<std::uint64_t>();
    }
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kConfig, "cannot open config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

}  // namespace photoread
