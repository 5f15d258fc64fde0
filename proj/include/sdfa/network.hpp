#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdfa/dataset.hpp"

namespace sdfa::nn {

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kNormGuard = 1e-12;

enum class Activation { kNone, kRelu, kSigmoid };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Hidden layers always use a leaky rectifier (slope 0.2).
struct NetworkSpec {
  std::string name;
  std::vector<int> layer_dims;  // input, hidden..., output
  Activation output_activation = Activation::kNone;
  std::uint64_t init_seed = 0;
};

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

struct ForwardCache {
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // pre-activation of each layer
  Matrix output;
  bool valid = false;
};

struct Gradients {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;
  Matrix input;  // d loss / d input, batch x in

  void add_scaled(const Gradients& other, double scale);
  bool all_finite() const;
};

class Mlp {
 public:
  Mlp() = default;
  /// Parameters drawn from a stream keyed on (init_seed, name).
  explicit Mlp(NetworkSpec spec);
  static Mlp zeros(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  int input_dim() const { return spec_.layer_dims.front(); }
  int output_dim() const { return spec_.layer_dims.back(); }
  std::size_t depth() const { return layers_.size(); }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Matrix forward(const Matrix& input) const;
  Matrix forward(const Matrix& input, ForwardCache& cache) const;

  /// Reverse-mode derivatives of a scalar loss whose adjoint w.r.t. the
  /// output batch is `output_adjoint`. Never touches the parameters.
  Gradients backward(const ForwardCache& cache, const Matrix& output_adjoint) const;

  Gradients zero_gradients() const;
  std::size_t parameter_count() const;

  bool operator==(const Mlp& o) const;

 private:
  NetworkSpec spec_;
  std::vector<DenseLayer> layers_;
};

// Parameter order: layer by layer, weight row-major then bias.
std::vector<double> flatten(const Mlp& net);
void unflatten(Mlp& net, std::span<const double> values);
std::vector<double> flatten(const Gradients& g);
void unflatten(Gradients& g, std::span<const double> values);

struct PenaltyResult {
  double value = 0.0;
  Gradients grads;    // w.r.t. critic parameters (input field unused)
  Vector input_norms; // per-sample ||grad_x D||
};

/// lambda * mean_b (||d D(x_b, c_b) / d x_b|| - 1)^2 with the norm over the
/// feature block only (or over feature and condition blocks together when
/// include_condition is set), and its exact parameter gradient. The critic must
/// have leaky hidden layers, a single output and no output activation; the
/// input gradient is then piecewise-linear in the weights, which gives the
/// closed form implemented here.
PenaltyResult penalty_gradients(const Mlp& critic, const Matrix& interpolates, const Matrix& condition,
                                double lambda, bool include_condition = false);

/// Adam moments with an L2 term weight_decay * param added to the gradient.
struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(const Mlp& net, AdamConfig cfg);

  /// Throws TrainingError naming `term` on a non-finite gradient.
  void step(Mlp& net, const Gradients& grads, std::string_view term);

  const AdamConfig& config() const { return cfg_; }
  long steps() const { return steps_; }
  const Gradients& first_moment() const { return m_; }
  const Gradients& second_moment() const { return v_; }
  void restore(long steps, Gradients m, Gradients v);

 private:
  AdamConfig cfg_;
  Gradients m_;
  Gradients v_;
  long steps_ = 0;
};

// Row-wise softmax and the mean cross-entropy against integer targets;
// `adjoint` receives d loss / d logits.
Matrix softmax_rows(const Matrix& logits);
double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& targets, Matrix* adjoint);
std::vector<int> argmax_rows(const Matrix& scores);

Matrix hconcat(const Matrix& left, const Matrix& right);

}  // namespace sdfa::nn
