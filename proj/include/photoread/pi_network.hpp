#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "photoread/count_model.hpp"
#include "photoread/posterior_grid.hpp"

namespace photoread {

enum class Activation {
  kTanh,
  kAlgebraic,  // x / sqrt(1 + x^2): smooth, saturating, no transcendental calls
};

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Permutation-invariant encoder (Phi) over per-shot log-likelihood ratios, mean pooling,
/// then a fully connected head (Pi) over [pooled, aux] producing grid logits. With
/// `count_scaled_readout` a linear map of the pooled features, scaled by the shot count,
/// is added to the logits (the exact log-likelihood is a per-shot sum).
struct ArchitectureSpec {
  static constexpr std::size_t kAuxDim = 5;  // log N, log alpha_g, log beta_g, log alpha_f, log beta_f

  std::vector<std::size_t> encoder_widths{32, 32};
  std::vector<std::size_t> head_widths{128, 128};
  std::size_t grid_size = 201;
  Activation activation = Activation::kAlgebraic;
  bool count_scaled_readout = true;

  std::size_t pooled_dim() const { return encoder_widths.back(); }
  std::size_t head_input_dim() const { return pooled_dim() + kAuxDim; }
  void validate() const;

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

/// Row-major (out x in) weight matrix and bias vector.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  static DenseLayer zeros(std::size_t in, std::size_t out);
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Input conditioning stored with the weights.
struct Standardization {
  double s_scale = 4.0;                  // encoder input = s / s_scale
  std::array<double, 5> aux_mean{};      // of the raw aux vector over the training split
  std::array<double, 5> aux_scale{1.0, 1.0, 1.0, 1.0, 1.0};
  double count_scale = 1.0;              // readout multiplier is count_scale * N

  friend bool operator==(const Standardization&, const Standardization&) = default;
};

struct TrainingMetadata {
  std::uint64_t seed = 0;
  int epochs = 0;
  double final_loss = 0.0;
  double validation_kl = 0.0;
  std::uint64_t tasks = 0;

  friend bool operator==(const TrainingMetadata&, const TrainingMetadata&) = default;
};

struct NetworkWeights {
  ArchitectureSpec arch;
  std::vector<DenseLayer> encoder;  // Phi
  std::vector<DenseLayer> head;     // Pi; the last layer emits grid logits
  DenseLayer readout;               // grid x pooled, used when arch.count_scaled_readout
  Standardization standard;
  TrainingMetadata meta;

  /// Glorot-uniform weights, zero biases; output layers start at zero.
  static NetworkWeights initialise(const ArchitectureSpec& arch, std::uint64_t seed);
  /// Same shapes, all entries zero (gradient accumulator).
  static NetworkWeights zeros_like(const NetworkWeights& other);

  /// Throws kArchitecture on shape mismatch, kNumerical on non-finite entries.
  void validate() const;
  std::size_t parameter_count() const;

  /// Every trainable tensor in a fixed order: encoder (W, b)..., head (W, b)..., readout (W, b).
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  std::vector<std::string> tensor_names() const;

  friend bool operator==(const NetworkWeights&, const NetworkWeights&) = default;
};

struct AuxFeatures {
  double n_shots = 0.0;
  SuperPoissonParams g;
  SuperPoissonParams f;

  std::array<double, 5> raw() const;
};

/// s_i = log f(n_i) - log g(n_i).
std::vector<double> encode_shots(std::span<const Count> counts, const SuperPoissonParams& g,
                                 const SuperPoissonParams& f);

/// KL(target || predicted) = sum t log(t / p); 0 log 0 = 0, p clamped at 1e-12.
double kl_divergence(std::span<const double> target, std::span<const double> predicted);
double kl_loss(const PosteriorGrid& target, const PosteriorGrid& predicted);

/// A set input in pooled form: element values with pooling weights summing to one.
struct WeightedSet {
  std::span<const double> values;
  std::span<const double> weights;  // empty means equal weights 1/size
};

/// Inference view of a NetworkWeights: keeps transposed copies so every matrix-vector
/// product runs over contiguous memory.
class Network {
 public:
  explicit Network(NetworkWeights weights);

  const NetworkWeights& weights() const { return weights_; }
  const ArchitectureSpec& arch() const { return weights_.arch; }

  /// Grid logits. Elements are pooled in the order given.
  std::vector<double> logits(const WeightedSet& set, const AuxFeatures& aux) const;

  /// Softmax posterior with moments. Elements are pooled in the order given.
  PosteriorGrid posterior(const WeightedSet& set, const AuxFeatures& aux) const;

  /// KL(target || network) for one task; accumulates d loss / d parameters into `grad`
  /// (scaled by `loss_weight`) when grad is non-null.
  double loss_and_gradient(const WeightedSet& set, const AuxFeatures& aux, std::span<const double> target,
                           NetworkWeights* grad, double loss_weight = 1.0) const;

  /// Re-derives the transposed copies after the weights change.
  void refresh();
  NetworkWeights& mutable_weights() { return weights_; }

 private:
  std::array<double, 5> standardised_aux(const AuxFeatures& aux) const;

  NetworkWeights weights_;
  std::vector<std::vector<double>> encoder_t_;
  std::vector<std::vector<double>> head_t_;
  std::vector<double> readout_t_;
};

/// Network posterior for a list of s values; sorts a copy first so that the pooled sum,
/// and hence the output, does not depend on input order.
PosteriorGrid forward(const NetworkWeights& weights, std::span<const double> s, const AuxFeatures& aux);

}  // namespace photoread
