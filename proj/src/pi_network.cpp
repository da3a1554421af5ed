#include "photoread/pi_network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "photoread/error.hpp"
#include "photoread/rng.hpp"

namespace photoread {
namespace {

constexpr double kProbabilityClamp = 1e-12;

inline double activate(Activation a, double z) {
  if (a == Activation::kTanh) return std::tanh(z);
  return z / std::sqrt(1.0 + z * z);
}

// Derivative expressed through the pre-activation z and output y.
inline double activate_grad(Activation a, double z, double y) {
  if (a == Activation::kTanh) return 1.0 - y * y;
  const double r = 1.0 / std::sqrt(1.0 + z * z);
  return r * r * r;
}

std::vector<double> transpose(const DenseLayer& layer) {
  std::vector<double> t(layer.weight.size());
  for (std::size_t o = 0; o < layer.out; ++o) {
    for (std::size_t i = 0; i < layer.in; ++i) t[i * layer.out + o] = layer.weight[o * layer.in + i];
  }
  return t;
}

// z = b + W a, with W supplied transposed (in x out).
inline void affine(const std::vector<double>& wt, const DenseLayer& layer, const double* a, double* z) {
  const std::size_t out = layer.out;
  std::copy(layer.bias.begin(), layer.bias.end(), z);
  for (std::size_t i = 0; i < layer.in; ++i) {
    const double ai = a[i];
    const double* row = wt.data() + i * out;
    for (std::size_t o = 0; o < out; ++o) z[o] += row[o] * ai;
  }
}

constexpr std::size_t kEncoderBlock = 64;

// Elements go through the encoder a block at a time. Each feature row holds a
// full block (the tail is zero-padded), so every element sees the same
// operation sequence wherever it lands and whatever the buffer alignment.
void encode_and_pool(const std::vector<DenseLayer>& encoder, Activation act, double inv_scale,
                     const WeightedSet& set, std::vector<double>& pooled) {
  constexpr std::size_t B = kEncoderBlock;
  const std::size_t n = set.values.size();
  std::size_t widest = 1;
  for (const DenseLayer& layer : encoder) widest = std::max(widest, layer.out);
  std::vector<double> a(widest * B), z(widest * B);
  for (std::size_t start = 0; start < n; start += B) {
    const std::size_t b = std::min(B, n - start);
    std::fill(a.begin(), a.begin() + B, 0.0);
    for (std::size_t c = 0; c < b; ++c) a[c] = set.values[start + c] * inv_scale;
    for (const DenseLayer& layer : encoder) {
      for (std::size_t o = 0; o < layer.out; ++o) {
        double* zo = z.data() + o * B;
        const double bo = layer.bias[o];
        for (std::size_t c = 0; c < B; ++c) zo[c] = bo;
        const double* wo = layer.weight.data() + o * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i) {
          const double w = wo[i];
          const double* ai = a.data() + i * B;
          for (std::size_t c = 0; c < B; ++c) zo[c] += w * ai[c];
        }
      }
      const std::size_t m = layer.out * B;
      if (act == Activation::kTanh) {
        for (std::size_t k = 0; k < m; ++k) a[k] = std::tanh(z[k]);
      } else {
        for (std::size_t k = 0; k < m; ++k) a[k] = z[k] / std::sqrt(1.0 + z[k] * z[k]);
      }
    }
    for (std::size_t r = 0; r < pooled.size(); ++r) {
      const double* ar = a.data() + r * B;
      double s = 0.0;
      if (set.weights.empty()) {
        for (std::size_t c = 0; c < b; ++c) s += ar[c];
      } else {
        for (std::size_t c = 0; c < b; ++c) s += ar[c] * set.weights[start + c];
      }
      pooled[r] += s;
    }
  }
}

void check_layer(const DenseLayer& layer, std::size_t in, std::size_t out, const std::string& name) {
  require(layer.in == in && layer.out == out && layer.weight.size() == in * out && layer.bias.size() == out,
          ErrorKind::kArchitecture,
          name + " has shape " + std::to_string(layer.out) + "x" + std::to_string(layer.in) + ", expected " +
              std::to_string(out) + "x" + std::to_string(in));
}

}  // namespace

std::string_view to_string(Activation a) { return a == Activation::kTanh ? "tanh" : "algebraic"; }

Activation activation_from_string(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "algebraic") return Activation::kAlgebraic;
  fail(ErrorKind::kConfig, "unknown activation '" + std::string(name) + "'");
}

void ArchitectureSpec::validate() const {
  require(!encoder_widths.empty() && !head_widths.empty(), ErrorKind::kArchitecture,
          "encoder and head need at least one hidden layer");
  for (std::size_t w : encoder_widths) require(w >= 1, ErrorKind::kArchitecture, "layer widths must be >= 1");
  for (std::size_t w : head_widths) require(w >= 1, ErrorKind::kArchitecture, "layer widths must be >= 1");
  require(grid_size >= 2, ErrorKind::kArchitecture, "network grid needs at least two nodes");
}

DenseLayer DenseLayer::zeros(std::size_t in, std::size_t out) {
  return {in, out, std::vector<double>(in * out, 0.0), std::vector<double>(out, 0.0)};
}

NetworkWeights NetworkWeights::initialise(const ArchitectureSpec& arch, std::uint64_t seed) {
  arch.validate();
  Rng rng(seed);
  auto glorot = [&](std::size_t in, std::size_t out) {
    DenseLayer layer = DenseLayer::zeros(in, out);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& w : layer.weight) w = limit * u(rng);
    return layer;
  };
  NetworkWeights net;
  net.arch = arch;
  std::size_t in = 1;
  for (std::size_t width : arch.encoder_widths) {
    net.encoder.push_back(glorot(in, width));
    in = width;
  }
  // Spread the first layer's transition points over the typical s range.
  std::uniform_real_distribution<double> shift(-1.0, 1.0);
  for (double& b : net.encoder.front().bias) b = shift(rng);
  in = arch.head_input_dim();
  for (std::size_t width : arch.head_widths) {
    net.head.push_back(glorot(in, width));
    in = width;
  }
  net.head.push_back(DenseLayer::zeros(in, arch.grid_size));
  if (arch.count_scaled_readout) net.readout = DenseLayer::zeros(arch.pooled_dim(), arch.grid_size);
  net.meta.seed = seed;
  return net;
}

NetworkWeights NetworkWeights::zeros_like(const NetworkWeights& other) {
  NetworkWeights z = other;
  for (std::span<double> t : z.tensors()) std::fill(t.begin(), t.end(), 0.0);
  return z;
}

void NetworkWeights::validate() const {
  arch.validate();
  require(encoder.size() == arch.encoder_widths.size(), ErrorKind::kArchitecture, "encoder layer count mismatch");
  require(head.size() == arch.head_widths.size() + 1, ErrorKind::kArchitecture, "head layer count mismatch");
  std::size_t in = 1;
  for (std::size_t j = 0; j < encoder.size(); ++j) {
    check_layer(encoder[j], in, arch.encoder_widths[j], "encoder layer " + std::to_string(j));
    in = arch.encoder_widths[j];
  }
  in = arch.head_input_dim();
  for (std::size_t j = 0; j < head.size(); ++j) {
    const std::size_t out = j < arch.head_widths.size() ? arch.head_widths[j] : arch.grid_size;
    check_layer(head[j], in, out, "head layer " + std::to_string(j));
    in = out;
  }
  if (arch.count_scaled_readout) {
    check_layer(readout, arch.pooled_dim(), arch.grid_size, "readout");
  } else {
    require(readout.weight.empty() && readout.bias.empty(), ErrorKind::kArchitecture,
            "readout present but disabled in the architecture");
  }
  for (std::span<const double> t : tensors()) {
    for (double v : t) require(std::isfinite(v), ErrorKind::kNumerical, "network weights contain non-finite values");
  }
  require(std::isfinite(standard.s_scale) && standard.s_scale > 0.0, ErrorKind::kArchitecture,
          "s_scale must be positive");
  for (double s : standard.aux_scale) {
    require(std::isfinite(s) && s > 0.0, ErrorKind::kArchitecture, "aux scales must be positive");
  }
}

std::size_t NetworkWeights::parameter_count() const {
  std::size_t n = 0;
  for (std::span<const double> t : tensors()) n += t.size();
  return n;
}

std::vector<std::span<double>> NetworkWeights::tensors() {
  std::vector<std::span<double>> out;
  for (DenseLayer& l : encoder) {
    out.emplace_back(l.weight);
    out.emplace_back(l.bias);
  }
  for (DenseLayer& l : head) {
    out.emplace_back(l.weight);
    out.emplace_back(l.bias);
  }
  if (arch.count_scaled_readout) {
    out.emplace_back(readout.weight);
    out.emplace_back(readout.bias);
  }
  return out;
}

std::vector<std::span<const double>> NetworkWeights::tensors() const {
  std::vector<std::span<const double>> out;
  for (std::span<double> t : const_cast<NetworkWeights*>(this)->tensors()) out.emplace_back(t);
  return out;
}

std::vector<std::string> NetworkWeights::tensor_names() const {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < encoder.size(); ++j) {
    names.push_back("encoder." + std::to_string(j) + ".weight");
    names.push_back("encoder." + std::to_string(j) + ".bias");
  }
  for (std::size_t j = 0; j < head.size(); ++j) {
    names.push_back("head." + std::to_string(j) + ".weight");
    names.push_back("head." + std::to_string(j) + ".bias");
  }
  if (arch.count_scaled_readout) {
    names.emplace_back("readout.weight");
    names.emplace_back("readout.bias");
  }
  return names;
}

std::array<double, 5> AuxFeatures::raw() const {
  require(n_shots >= 1.0, ErrorKind::kDomain, "network input needs at least one shot");
  g.validate();
  f.validate();
  return {std::log(n_shots), std::log(g.alpha), std::log(g.beta), std::log(f.alpha), std::log(f.beta)};
}

std::vector<double> encode_shots(std::span<const Count> counts, const SuperPoissonParams& g,
                                 const SuperPoissonParams& f) {
  std::vector<double> s;
  s.reserve(counts.size());
  for (Count n : counts) s.push_back(log_pmf(f, n) - log_pmf(g, n));
  return s;
}

double kl_divergence(std::span<const double> target, std::span<const double> predicted) {
  require(target.size() == predicted.size(), ErrorKind::kDomain, "KL needs distributions on the same grid");
  double kl = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k) {
    const double t = target[k];
    if (t <= 0.0) continue;
    kl += t * std::log(t / std::max(predicted[k], kProbabilityClamp));
  }
  return std::max(kl, 0.0);
}

double kl_loss(const PosteriorGrid& target, const PosteriorGrid& predicted) {
  require(target.size() == predicted.size(), ErrorKind::kDomain, "KL needs distributions on the same grid");
  for (std::size_t k = 0; k < target.size(); ++k) {
    require(std::abs(target.nodes[k] - predicted.nodes[k]) < 1e-12, ErrorKind::kDomain,
            "KL needs distributions on the same grid");
  }
  return kl_divergence(target.masses, predicted.masses);
}

Network::Network(NetworkWeights weights) : weights_(std::move(weights)) {
  weights_.validate();
  refresh();
}

void Network::refresh() {
  encoder_t_.clear();
  head_t_.clear();
  for (const DenseLayer& l : weights_.encoder) encoder_t_.push_back(transpose(l));
  for (const DenseLayer& l : weights_.head) head_t_.push_back(transpose(l));
  readout_t_ = weights_.arch.count_scaled_readout ? transpose(weights_.readout) : std::vector<double>{};
}

std::array<double, 5> Network::standardised_aux(const AuxFeatures& aux) const {
  std::array<double, 5> raw = aux.raw();
  const Standardization& st = weights_.standard;
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = (raw[i] - st.aux_mean[i]) / st.aux_scale[i];
  return raw;
}

namespace {

void check_set(const WeightedSet& set) {
  require(!set.values.empty(), ErrorKind::kDomain, "network input needs at least one shot");
  require(set.weights.empty() || set.weights.size() == set.values.size(), ErrorKind::kArchitecture,
          "pooling weights and values differ in length");
  for (double s : set.values) require(std::isfinite(s), ErrorKind::kNumerical, "log-likelihood ratio is not finite");
}

void softmax(std::span<const double> logits, std::span<double> out) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - peak);
    total += out[k];
  }
  for (double& p : out) p /= total;
}

}  // namespace

std::vector<double> Network::logits(const WeightedSet& set, const AuxFeatures& aux) const {
  check_set(set);
  const ArchitectureSpec& arch = weights_.arch;
  const Activation act = arch.activation;
  const std::size_t pooled_dim = arch.pooled_dim();
  std::size_t widest = 1;
  for (std::size_t w : arch.encoder_widths) widest = std::max(widest, w);
  for (std::size_t w : arch.head_widths) widest = std::max(widest, w);
  widest = std::max({widest, arch.grid_size, arch.head_input_dim()});

  std::vector<double> z(widest), pooled(pooled_dim, 0.0);
  encode_and_pool(weights_.encoder, act, 1.0 / weights_.standard.s_scale, set, pooled);
  if (set.weights.empty()) {
    const double inv_n = 1.0 / static_cast<double>(set.values.size());
    for (double& p : pooled) p *= inv_n;
  }

  const std::array<double, 5> aux_std = standardised_aux(aux);
  std::vector<double> v(widest);
  std::copy(pooled.begin(), pooled.end(), v.begin());
  std::copy(aux_std.begin(), aux_std.end(), v.begin() + static_cast<std::ptrdiff_t>(pooled_dim));
  for (std::size_t j = 0; j + 1 < weights_.head.size(); ++j) {
    const DenseLayer& layer = weights_.head[j];
    affine(head_t_[j], layer, v.data(), z.data());
    for (std::size_t o = 0; o < layer.out; ++o) v[o] = activate(act, z[o]);
  }
  std::vector<double> out(arch.grid_size);
  affine(head_t_.back(), weights_.head.back(), v.data(), out.data());
  if (arch.count_scaled_readout) {
    std::vector<double> r(arch.grid_size);
    affine(readout_t_, weights_.readout, pooled.data(), r.data());
    const double c = weights_.standard.count_scale * aux.n_shots;
    for (std::size_t k = 0; k < arch.grid_size; ++k) out[k] += c * r[k];
  }
  return out;
}

PosteriorGrid Network::posterior(const WeightedSet& set, const AuxFeatures& aux) const {
  const std::vector<double> z = logits(set, aux);
  PosteriorGrid grid;
  grid.nodes = grid_nodes(z.size());
  grid.masses.resize(z.size());
  softmax(z, grid.masses);
  std::tie(grid.mean, grid.sd) = posterior_moments(grid);
  return grid;
}

double Network::loss_and_gradient(const WeightedSet& set, const AuxFeatures& aux, std::span<const double> target,
                                  NetworkWeights* grad, double loss_weight) const {
  check_set(set);
  const ArchitectureSpec& arch = weights_.arch;
  require(target.size() == arch.grid_size, ErrorKind::kArchitecture, "target grid does not match the network");
  const Activation act = arch.activation;
  const std::size_t n_elem = set.values.size();
  const std::size_t n_enc = weights_.encoder.size();
  const std::size_t pooled_dim = arch.pooled_dim();
  const bool equal_weights = set.weights.empty();
  auto elem_weight = [&](std::size_t u) {
    return equal_weights ? 1.0 / static_cast<double>(n_elem) : set.weights[u];
  };

  // Encoder activations per element: acts[j] holds the input of layer j (acts[0] = x).
  std::vector<std::vector<double>> acts(n_enc + 1), pre(n_enc);
  acts[0].resize(n_elem);
  const double inv_scale = 1.0 / weights_.standard.s_scale;
  for (std::size_t u = 0; u < n_elem; ++u) acts[0][u] = set.values[u] * inv_scale;
  for (std::size_t j = 0; j < n_enc; ++j) {
    const DenseLayer& layer = weights_.encoder[j];
    pre[j].resize(n_elem * layer.out);
    acts[j + 1].resize(n_elem * layer.out);
    for (std::size_t u = 0; u < n_elem; ++u) {
      double* z = pre[j].data() + u * layer.out;
      affine(encoder_t_[j], layer, acts[j].data() + u * layer.in, z);
      double* y = acts[j + 1].data() + u * layer.out;
      for (std::size_t o = 0; o < layer.out; ++o) y[o] = activate(act, z[o]);
    }
  }
  std::vector<double> pooled(pooled_dim, 0.0);
  for (std::size_t u = 0; u < n_elem; ++u) {
    const double w = elem_weight(u);
    const double* y = acts[n_enc].data() + u * pooled_dim;
    for (std::size_t o = 0; o < pooled_dim; ++o) pooled[o] += w * y[o];
  }

  // Head.
  const std::size_t n_head = weights_.head.size();
  std::vector<std::vector<double>> h_in(n_head), h_pre(n_head - 1);
  h_in[0].resize(arch.head_input_dim());
  std::copy(pooled.begin(), pooled.end(), h_in[0].begin());
  const std::array<double, 5> aux_std = standardised_aux(aux);
  std::copy(aux_std.begin(), aux_std.end(), h_in[0].begin() + static_cast<std::ptrdiff_t>(pooled_dim));
  for (std::size_t j = 0; j + 1 < n_head; ++j) {
    const DenseLayer& layer = weights_.head[j];
    h_pre[j].resize(layer.out);
    affine(head_t_[j], layer, h_in[j].data(), h_pre[j].data());
    h_in[j + 1].resize(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) h_in[j + 1][o] = activate(act, h_pre[j][o]);
  }
  std::vector<double> logit(arch.grid_size);
  affine(head_t_.back(), weights_.head.back(), h_in.back().data(), logit.data());
  const double c = weights_.standard.count_scale * aux.n_shots;
  if (arch.count_scaled_readout) {
    std::vector<double> r(arch.grid_size);
    affine(readout_t_, weights_.readout, pooled.data(), r.data());
    for (std::size_t k = 0; k < arch.grid_size; ++k) logit[k] += c * r[k];
  }

  // Exact log-softmax KL (no clamp) so the analytic gradient matches the objective.
  const double peak = *std::max_element(logit.begin(), logit.end());
  double total = 0.0;
  for (double z : logit) total += std::exp(z - peak);
  const double log_norm = peak + std::log(total);
  double loss = 0.0;
  std::vector<double> prob(arch.grid_size);
  for (std::size_t k = 0; k < arch.grid_size; ++k) {
    const double log_q = logit[k] - log_norm;
    prob[k] = std::exp(log_q);
    if (target[k] > 0.0) loss += target[k] * (std::log(target[k]) - log_q);
  }
  if (grad == nullptr) return loss;

  // Backward. d loss / d logit = q - t.
  std::vector<double> g(arch.grid_size);
  for (std::size_t k = 0; k < arch.grid_size; ++k) g[k] = loss_weight * (prob[k] - target[k]);

  std::vector<double> d_pooled(pooled_dim, 0.0);
  if (arch.count_scaled_readout) {
    DenseLayer& gr = grad->readout;
    const DenseLayer& wr = weights_.readout;
    for (std::size_t k = 0; k < arch.grid_size; ++k) {
      const double gk = c * g[k];
      gr.bias[k] += gk;
      double* row = gr.weight.data() + k * pooled_dim;
      const double* wrow = wr.weight.data() + k * pooled_dim;
      for (std::size_t i = 0; i < pooled_dim; ++i) {
        row[i] += gk * pooled[i];
        d_pooled[i] += gk * wrow[i];
      }
    }
  }

  std::vector<double> dv = g;
  for (std::size_t jj = n_head; jj-- > 0;) {
    const DenseLayer& layer = weights_.head[jj];
    DenseLayer& gl = grad->head[jj];
    std::vector<double> dz = dv;
    if (jj + 1 < n_head) {
      for (std::size_t o = 0; o < layer.out; ++o) {
        dz[o] = dv[o] * activate_grad(act, h_pre[jj][o], h_in[jj + 1][o]);
      }
    }
    std::vector<double> d_in(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = dz[o];
      gl.bias[o] += d;
      double* grow = gl.weight.data() + o * layer.in;
      const double* wrow = layer.weight.data() + o * layer.in;
      const double* x = h_in[jj].data();
      for (std::size_t i = 0; i < layer.in; ++i) {
        grow[i] += d * x[i];
        d_in[i] += d * wrow[i];
      }
    }
    dv = std::move(d_in);
  }
  for (std::size_t i = 0; i < pooled_dim; ++i) d_pooled[i] += dv[i];

  std::vector<double> da, dz, d_prev;
  for (std::size_t u = 0; u < n_elem; ++u) {
    const double w = elem_weight(u);
    da.assign(pooled_dim, 0.0);
    for (std::size_t o = 0; o < pooled_dim; ++o) da[o] = w * d_pooled[o];
    for (std::size_t jj = n_enc; jj-- > 0;) {
      const DenseLayer& layer = weights_.encoder[jj];
      DenseLayer& gl = grad->encoder[jj];
      const double* z = pre[jj].data() + u * layer.out;
      const double* y = acts[jj + 1].data() + u * layer.out;
      const double* x = acts[jj].data() + u * layer.in;
      dz.resize(layer.out);
      for (std::size_t o = 0; o < layer.out; ++o) dz[o] = da[o] * activate_grad(act, z[o], y[o]);
      d_prev.assign(layer.in, 0.0);
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double d = dz[o];
        gl.bias[o] += d;
        double* grow = gl.weight.data() + o * layer.in;
        const double* wrow = layer.weight.data() + o * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i) {
          grow[i] += d * x[i];
          d_prev[i] += d * wrow[i];
        }
      }
      da.swap(d_prev);
    }
  }
  return loss;
}

PosteriorGrid forward(const NetworkWeights& weights, std::span<const double> s, const AuxFeatures& aux) {
  for (double v : s) require(std::isfinite(v), ErrorKind::kNumerical, "log-likelihood ratio is not finite");
  std::vector<double> sorted(s.begin(), s.end());
  std::sort(sorted.begin(), sorted.end());
  const Network net(weights);
  return net.posterior(WeightedSet{sorted, {}}, aux);
}

}  // namespace photoread
