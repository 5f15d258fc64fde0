#include "sdfa/network.hpp"

#include <cmath>

#include "sdfa/errors.hpp"
#include "sdfa/rng.hpp"

namespace sdfa::nn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kNone: return "none";
    case Activation::kRelu: return "rectifier";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "none") return Activation::kNone;
  if (s == "rectifier") return Activation::kRelu;
  if (s == "sigmoid") return Activation::kSigmoid;
  throw ArgumentError("unknown activation '" + s + "'");
}

namespace {

void check_spec(const NetworkSpec& spec) {
  if (spec.layer_dims.size() < 2) throw ArgumentError("network '" + spec.name + "' needs at least one layer");
  for (int d : spec.layer_dims)
    if (d < 1) throw ArgumentError("network '" + spec.name + "' has a layer of width < 1");
}

Matrix leaky_derivative(const Matrix& pre) {
  return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; });
}

}  // namespace

void Gradients::add_scaled(const Gradients& other, double scale) {
  for (std::size_t l = 0; l < weight.size(); ++l) {
    weight[l] += scale * other.weight[l];
    bias[l] += scale * other.bias[l];
  }
}

bool Gradients::all_finite() const {
  for (std::size_t l = 0; l < weight.size(); ++l)
    if (!weight[l].allFinite() || !bias[l].allFinite()) return false;
  return true;
}

Mlp::Mlp(NetworkSpec spec) : spec_(std::move(spec)) {
  check_spec(spec_);
  auto eng = rng::stream(spec_.init_seed, "init/" + spec_.name);
  for (std::size_t l = 0; l + 1 < spec_.layer_dims.size(); ++l) {
    const int in = spec_.layer_dims[l];
    const int out = spec_.layer_dims[l + 1];
    layers_.push_back(DenseLayer{rng::normal(eng, out, in, 1.0 / std::sqrt(static_cast<double>(in))),
                                 Vector::Zero(out)});
  }
}

Mlp Mlp::zeros(NetworkSpec spec) {
  Mlp net;
  check_spec(spec);
  net.spec_ = std::move(spec);
  for (std::size_t l = 0; l + 1 < net.spec_.layer_dims.size(); ++l)
    net.layers_.push_back(DenseLayer{Matrix::Zero(net.spec_.layer_dims[l + 1], net.spec_.layer_dims[l]),
                                     Vector::Zero(net.spec_.layer_dims[l + 1])});
  return net;
}

Matrix Mlp::forward(const Matrix& input) const {
  ForwardCache scratch;
  return forward(input, scratch);
}

Matrix Mlp::forward(const Matrix& input, ForwardCache& cache) const {
  if (input.cols() != input_dim())
    throw ShapeError("network '" + spec_.name + "' expects width " + std::to_string(input_dim()) + ", got " +
                     std::to_string(input.cols()));
  cache.inputs.clear();
  cache.pre.clear();
  Matrix act = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    cache.inputs.push_back(act);
    Matrix pre = act * layers_[l].weight.transpose();
    pre.rowwise() += layers_[l].bias.transpose();
    cache.pre.push_back(pre);
    if (l + 1 < layers_.size()) {
      act = pre.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
    } else {
      switch (spec_.output_activation) {
        case Activation::kNone: act = pre; break;
        case Activation::kRelu: act = pre.cwiseMax(0.0); break;
        case Activation::kSigmoid: act = pre.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); }); break;
      }
    }
  }
  cache.output = act;
  cache.valid = true;
  return act;
}

Gradients Mlp::zero_gradients() const {
  Gradients g;
  for (const auto& layer : layers_) {
    g.weight.push_back(Matrix::Zero(layer.weight.rows(), layer.weight.cols()));
    g.bias.push_back(Vector::Zero(layer.bias.size()));
  }
  return g;
}

Gradients Mlp::backward(const ForwardCache& cache, const Matrix& output_adjoint) const {
  if (!cache.valid || cache.pre.size() != layers_.size())
    throw StateError("backward on network '" + spec_.name + "' without a forward pass");
  if (output_adjoint.rows() != cache.output.rows() || output_adjoint.cols() != cache.output.cols())
    throw ShapeError("output adjoint shape does not match the cached forward output");

  Gradients g;
  g.weight.resize(layers_.size());
  g.bias.resize(layers_.size());
  Matrix delta;
  switch (spec_.output_activation) {
    case Activation::kNone: delta = output_adjoint; break;
    case Activation::kRelu:
      delta = output_adjoint.cwiseProduct(cache.pre.back().unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
      break;
    case Activation::kSigmoid:
      delta = output_adjoint.cwiseProduct(cache.output.cwiseProduct((1.0 - cache.output.array()).matrix()));
      break;
  }
  for (std::size_t l = layers_.size(); l-- > 0;) {
    g.weight[l] = delta.transpose() * cache.inputs[l];
    g.bias[l] = delta.colwise().sum().transpose();
    Matrix upstream = delta * layers_[l].weight;
    if (l > 0)
      delta = upstream.cwiseProduct(leaky_derivative(cache.pre[l - 1]));
    else
      g.input = std::move(upstream);
  }
  return g;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return n;
}

bool Mlp::operator==(const Mlp& o) const {
  if (spec_.layer_dims != o.spec_.layer_dims || spec_.output_activation != o.spec_.output_activation) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l)
    if (layers_[l].weight != o.layers_[l].weight || layers_[l].bias != o.layers_[l].bias) return false;
  return true;
}

namespace {

template <class Mats, class Vecs>
std::vector<double> flatten_pairs(const Mats& mats, const Vecs& vecs) {
  std::vector<double> out;
  for (std::size_t l = 0; l < mats.size(); ++l) {
    const Matrix& w = mats[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) out.push_back(w(r, c));
    for (Eigen::Index r = 0; r < vecs[l].size(); ++r) out.push_back(vecs[l](r));
  }
  return out;
}

template <class Mats, class Vecs>
void unflatten_pairs(Mats& mats, Vecs& vecs, std::span<const double> values) {
  std::size_t k = 0;
  auto next = [&]() {
    if (k >= values.size()) throw ShapeError("parameter blob too short");
    return values[k++];
  };
  for (std::size_t l = 0; l < mats.size(); ++l) {
    Matrix& w = mats[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = next();
    for (Eigen::Index r = 0; r < vecs[l].size(); ++r) vecs[l](r) = next();
  }
  if (k != values.size()) throw ShapeError("parameter blob too long");
}

}  // namespace

std::vector<double> flatten(const Mlp& net) {
  std::vector<Matrix> w;
  std::vector<Vector> b;
  for (const auto& layer : net.layers()) {
    w.push_back(layer.weight);
    b.push_back(layer.bias);
  }
  return flatten_pairs(w, b);
}

void unflatten(Mlp& net, std::span<const double> values) {
  std::vector<Matrix> w;
  std::vector<Vector> b;
  for (const auto& layer : net.layers()) {
    w.push_back(layer.weight);
    b.push_back(layer.bias);
  }
  unflatten_pairs(w, b, values);
  for (std::size_t l = 0; l < w.size(); ++l) {
    net.layers()[l].weight = w[l];
    net.layers()[l].bias = b[l];
  }
}

std::vector<double> flatten(const Gradients& g) { return flatten_pairs(g.weight, g.bias); }

void unflatten(Gradients& g, std::span<const double> values) { unflatten_pairs(g.weight, g.bias, values); }

PenaltyResult penalty_gradients(const Mlp& critic, const Matrix& interpolates, const Matrix& condition,
                                double lambda, bool include_condition) {
  if (critic.output_dim() != 1 || critic.spec().output_activation != Activation::kNone)
    throw ArgumentError("gradient penalty needs a scalar critic without output activation");
  if (interpolates.rows() != condition.rows()) throw ShapeError("interpolate/condition batch mismatch");
  const Eigen::Index n = interpolates.rows();
  const Eigen::Index dx = interpolates.cols() + (include_condition ? condition.cols() : 0);
  if (n == 0) throw ArgumentError("empty interpolate batch");

  ForwardCache cache;
  critic.forward(hconcat(interpolates, condition), cache);
  const auto& layers = critic.layers();
  const std::size_t depth = layers.size();

  // Input-gradient pass: E_depth = 1 * W_last; D_l = S_l .* E_{l+1}; E_l = D_l W_l.
  std::vector<Matrix> slopes(depth);   // S_l for hidden layers l < depth-1
  std::vector<Matrix> deltas(depth);   // D_l
  std::vector<Matrix> e(depth);        // E_l
  e[depth - 1] = Matrix::Ones(n, 1) * layers[depth - 1].weight;
  for (std::size_t l = depth - 1; l-- > 0;) {
    slopes[l] = leaky_derivative(cache.pre[l]);
    deltas[l] = slopes[l].cwiseProduct(e[l + 1]);
    e[l] = deltas[l] * layers[l].weight;
  }
  const Matrix grad_x = e[0].leftCols(dx);

  PenaltyResult out;
  out.input_norms = grad_x.rowwise().norm();
  const Eigen::ArrayXd gap = out.input_norms.array() - 1.0;
  out.value = lambda * gap.square().mean();

  // Reverse through the input-gradient pass.
  out.grads = critic.zero_gradients();
  Matrix e_bar = Matrix::Zero(n, e[0].cols());
  // A zero input gradient has zero e_bar regardless; the guard only keeps the division finite.
  const Eigen::ArrayXd coeff =
      lambda * 2.0 / static_cast<double>(n) * gap / out.input_norms.array().max(kNormGuard);
  e_bar.leftCols(dx) = grad_x.array().colwise() * coeff;
  for (std::size_t l = 0; l + 1 < depth; ++l) {
    out.grads.weight[l] = deltas[l].transpose() * e_bar;
    const Matrix d_bar = e_bar * layers[l].weight.transpose();
    e_bar = slopes[l].cwiseProduct(d_bar);
  }
  out.grads.weight[depth - 1] = e_bar.colwise().sum();
  return out;
}

AdamState::AdamState(const Mlp& net, AdamConfig cfg) : cfg_(cfg), m_(net.zero_gradients()), v_(net.zero_gradients()) {}

void AdamState::step(Mlp& net, const Gradients& grads, std::string_view term) {
  if (!grads.all_finite()) throw TrainingError(std::string(term), "non-finite gradient");
  if (grads.weight.size() != net.depth()) throw ShapeError("gradient/parameter depth mismatch");
  ++steps_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    if (grad.rows() != param.rows() || grad.cols() != param.cols()) throw ShapeError("gradient shape mismatch");
    auto g = (grad + cfg_.weight_decay * param).eval();
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    param.array() -= cfg_.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg_.epsilon);
  };
  for (std::size_t l = 0; l < net.depth(); ++l) {
    update(net.layers()[l].weight, grads.weight[l], m_.weight[l], v_.weight[l]);
    update(net.layers()[l].bias, grads.bias[l], m_.bias[l], v_.bias[l]);
  }
}

void AdamState::restore(long steps, Gradients m, Gradients v) {
  steps_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double mx = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - mx).exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& targets, Matrix* adjoint) {
  const Eigen::Index n = logits.rows();
  if (static_cast<Eigen::Index>(targets.size()) != n) throw ShapeError("target count does not match logits rows");
  if (n == 0) throw ArgumentError("empty batch");
  double loss = 0.0;
  if (adjoint) adjoint->resize(n, logits.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= logits.cols()) throw ArgumentError("target label " + std::to_string(t) + " out of range");
    const double mx = logits.row(r).maxCoeff();
    const Eigen::ArrayXd shifted = (logits.row(r).array() - mx).transpose();
    const double lse = std::log(shifted.exp().sum());
    loss += lse - shifted(t);
    if (adjoint) {
      adjoint->row(r) = (shifted - lse).exp().matrix().transpose();
      (*adjoint)(r, t) -= 1.0;
    }
  }
  if (adjoint) *adjoint /= static_cast<double>(n);
  return loss / static_cast<double>(n);
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c)
      if (scores(r, c) > scores(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

Matrix hconcat(const Matrix& left, const Matrix& right) {
  if (left.rows() != right.rows()) throw ShapeError("row mismatch in concatenation");
  Matrix out(left.rows(), left.cols() + right.cols());
  out << left, right;
  return out;
}

}  // namespace sdfa::nn
