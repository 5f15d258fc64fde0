#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "sdfa/errors.hpp"
#include "sdfa/network.hpp"
#include "sdfa/rng.hpp"

using namespace sdfa;
using namespace sdfa::nn;
using sdfa::test::numeric_gradient;
using sdfa::test::relative_error;

namespace {

Mlp random_net(std::vector<int> dims, Activation out, std::uint64_t seed) {
  return Mlp(NetworkSpec{"net", std::move(dims), out, seed});
}

// Shifts pre-activations away from the leaky kink so central differences
// see a single linear piece.
bool near_kink(const Mlp& net, const Matrix& x, double margin) {
  ForwardCache c;
  net.forward(x, c);
  for (std::size_t l = 0; l + 1 < c.pre.size(); ++l)
    if ((c.pre[l].array().abs() < margin).any()) return true;
  return false;
}

}  // namespace

TEST_CASE("forward/backward agree with finite differences") {
  for (Activation out : {Activation::kNone, Activation::kSigmoid, Activation::kRelu}) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      Mlp net = random_net({4, 7, 5, 3}, out, seed);
      auto eng = rng::stream(seed, "test/fd");
      const Matrix x = rng::normal(eng, 5, 4);
      const Matrix r = rng::normal(eng, 5, 3);
      if (near_kink(net, x, 1e-4)) continue;
      if (out == Activation::kRelu) {
        ForwardCache c;
        net.forward(x, c);
        if ((c.pre.back().array().abs() < 1e-4).any()) continue;
      }

      ForwardCache cache;
      net.forward(x, cache);
      const Gradients g = net.backward(cache, r);

      auto loss = [&](const std::vector<double>& p) {
        Mlp probe = net;
        unflatten(probe, p);
        return (probe.forward(x).array() * r.array()).sum();
      };
      CHECK(relative_error(flatten(g), numeric_gradient(loss, flatten(net))) <= 1e-4);

      std::vector<double> xv(x.data(), x.data() + x.size());
      auto loss_x = [&](const std::vector<double>& v) {
        const Matrix probe = Eigen::Map<const Matrix>(v.data(), x.rows(), x.cols());
        return (net.forward(probe).array() * r.array()).sum();
      };
      const std::vector<double> gx(g.input.data(), g.input.data() + g.input.size());
      CHECK(relative_error(gx, numeric_gradient(loss_x, xv)) <= 1e-4);
    }
  }
}

TEST_CASE("penalty gradients agree with finite differences") {
  for (bool joint : {false, true}) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      Mlp critic = random_net({3 + 2, 6, 4, 1}, Activation::kNone, seed);
      auto eng = rng::stream(seed, "test/gp");
      const Matrix x = rng::normal(eng, 4, 3);
      const Matrix c = rng::uniform(eng, 4, 2);
      if (near_kink(critic, hconcat(x, c), 1e-3)) continue;
      const auto res = penalty_gradients(critic, x, c, 10.0, joint);
      auto loss = [&](const std::vector<double>& p) {
        Mlp probe = critic;
        unflatten(probe, p);
        return penalty_gradients(probe, x, c, 10.0, joint).value;
      };
      CHECK(relative_error(flatten(res.grads), numeric_gradient(loss, flatten(critic), 1e-6)) <= 1e-3);
    }
  }
}

TEST_CASE("penalty value matches finite-difference input gradients") {
  Mlp critic = random_net({5, 8, 1}, Activation::kNone, 4);
  auto eng = rng::stream(1, "test/gpval");
  const Matrix x = rng::normal(eng, 3, 3);
  const Matrix c = rng::uniform(eng, 3, 2);
  const auto res = penalty_gradients(critic, x, c, 1.0);
  double want = 0.0;
  for (Eigen::Index b = 0; b < 3; ++b) {
    double sq = 0.0;
    for (Eigen::Index j = 0; j < 3; ++j) {
      Matrix up = hconcat(x.row(b), c.row(b)), down = up;
      up(0, j) += 1e-6;
      down(0, j) -= 1e-6;
      const double d = (critic.forward(up)(0, 0) - critic.forward(down)(0, 0)) / 2e-6;
      sq += d * d;
    }
    want += (std::sqrt(sq) - 1.0) * (std::sqrt(sq) - 1.0) / 3.0;
  }
  CHECK(res.value == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("linear critic analytic penalty") {
  Mlp critic = Mlp::zeros(NetworkSpec{"lin", {3 + 2, 1}, Activation::kNone, 0});
  critic.layers()[0].weight << 0.3, -1.2, 2.0, 5.0, -7.0;  // w_x = (0.3, -1.2, 2.0)
  const double wx = std::sqrt(0.09 + 1.44 + 4.0);
  auto eng = rng::stream(2, "test/lin");
  const Matrix x = rng::normal(eng, 6, 3);
  const Matrix c = rng::uniform(eng, 6, 2);
  const double lambda = 10.0;
  const auto res = penalty_gradients(critic, x, c, lambda);
  CHECK(std::abs(res.value - lambda * (wx - 1.0) * (wx - 1.0)) <= 1e-12);
  // d/dw_x of lambda (|w_x| - 1)^2 = 2 lambda (|w_x| - 1) w_x / |w_x|; zero on the condition block.
  for (int j = 0; j < 3; ++j)
    CHECK(std::abs(res.grads.weight[0](0, j) - 2 * lambda * (wx - 1) * critic.layers()[0].weight(0, j) / wx) <= 1e-12);
  CHECK(res.grads.weight[0](0, 3) == 0.0);
  CHECK(res.grads.weight[0](0, 4) == 0.0);

  // Joint norm covers the condition weights too.
  const double w = std::sqrt(0.09 + 1.44 + 4.0 + 25.0 + 49.0);
  CHECK(std::abs(penalty_gradients(critic, x, c, lambda, true).value - lambda * (w - 1) * (w - 1)) <= 1e-10);
}

TEST_CASE("penalty argument checks") {
  Mlp two_out = random_net({4, 2}, Activation::kNone, 0);
  CHECK_THROWS_AS(penalty_gradients(two_out, Matrix::Zero(2, 2), Matrix::Zero(2, 2), 1.0), ArgumentError);
  Mlp sig = random_net({4, 1}, Activation::kSigmoid, 0);
  CHECK_THROWS_AS(penalty_gradients(sig, Matrix::Zero(2, 2), Matrix::Zero(2, 2), 1.0), ArgumentError);
  Mlp ok = random_net({4, 1}, Activation::kNone, 0);
  CHECK_THROWS_AS(penalty_gradients(ok, Matrix::Zero(2, 2), Matrix::Zero(3, 2), 1.0), ShapeError);
  // Zero gradient stays finite thanks to the norm guard.
  Mlp zero = Mlp::zeros(NetworkSpec{"z", {4, 1}, Activation::kNone, 0});
  const auto r = penalty_gradients(zero, Matrix::Zero(2, 2), Matrix::Zero(2, 2), 10.0);
  CHECK(r.grads.all_finite());
  CHECK(r.value == doctest::Approx(10.0));
}

TEST_CASE("network shape and state errors") {
  Mlp net = random_net({3, 4, 2}, Activation::kNone, 1);
  CHECK_THROWS_AS(net.forward(Matrix::Zero(2, 4)), ShapeError);
  ForwardCache empty;
  CHECK_THROWS_AS(net.backward(empty, Matrix::Zero(2, 2)), StateError);
  CHECK_THROWS_AS(Mlp(NetworkSpec{"bad", {3}, Activation::kNone, 0}), ArgumentError);
  CHECK(net.parameter_count() == 3 * 4 + 4 + 4 * 2 + 2);
}

TEST_CASE("initialization is seeded and zero networks are zero") {
  CHECK(random_net({3, 4, 2}, Activation::kNone, 5) == random_net({3, 4, 2}, Activation::kNone, 5));
  CHECK_FALSE(random_net({3, 4, 2}, Activation::kNone, 5) == random_net({3, 4, 2}, Activation::kNone, 6));
  const Mlp z = Mlp::zeros(NetworkSpec{"z", {3, 5}, Activation::kNone, 0});
  CHECK(z.forward(Matrix::Ones(2, 3)).isZero());
  for (double v : flatten(z)) CHECK(v == 0.0);
}

TEST_CASE("flatten/unflatten round trip") {
  Mlp net = random_net({3, 4, 2}, Activation::kRelu, 2);
  auto p = flatten(net);
  Mlp other = Mlp::zeros(net.spec());
  unflatten(other, p);
  CHECK(other == net);
  p.pop_back();
  CHECK_THROWS_AS(unflatten(other, p), ShapeError);
}

TEST_CASE("softmax cross-entropy gradient") {
  auto eng = rng::stream(3, "test/ce");
  const Matrix logits = rng::normal(eng, 4, 5);
  const std::vector<int> t{0, 4, 2, 2};
  Matrix adj;
  const double loss = softmax_cross_entropy(logits, t, &adj);
  const Matrix p = softmax_rows(logits);
  double want = 0.0;
  for (int r = 0; r < 4; ++r) want -= std::log(p(r, t[static_cast<std::size_t>(r)])) / 4.0;
  CHECK(loss == doctest::Approx(want));
  std::vector<double> lv(logits.data(), logits.data() + logits.size());
  auto f = [&](const std::vector<double>& v) {
    return softmax_cross_entropy(Eigen::Map<const Matrix>(v.data(), 4, 5), t, nullptr);
  };
  const std::vector<double> got(adj.data(), adj.data() + adj.size());
  CHECK(relative_error(got, numeric_gradient(f, lv)) <= 1e-6);
  CHECK_THROWS_AS(softmax_cross_entropy(logits, {0, 5, 0, 0}, nullptr), ArgumentError);
  // Large logits stay finite.
  CHECK(std::isfinite(softmax_cross_entropy(Matrix::Constant(1, 3, 1e4), {1}, nullptr)));
}

TEST_CASE("argmax ties go to the lowest index") {
  Matrix s(2, 3);
  s << 1, 1, 0, 0, 2, 2;
  CHECK(argmax_rows(s) == std::vector<int>{0, 1});
}

TEST_CASE("adam step") {
  Mlp net = Mlp::zeros(NetworkSpec{"w", {1, 1}, Activation::kNone, 0});
  net.layers()[0].weight(0, 0) = 1.0;
  AdamState opt(net, AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
  Gradients g = net.zero_gradients();
  g.weight[0](0, 0) = 4.0;
  opt.step(net, g, "w");
  // First bias-corrected step moves by lr * sign(g).
  CHECK(net.layers()[0].weight(0, 0) == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(opt.steps() == 1);
  g.weight[0](0, 0) = std::nan("");
  try {
    opt.step(net, g, "g_adv");
    CHECK(false);
  } catch (const TrainingError& e) {
    CHECK(e.term == "g_adv");
  }
}

TEST_CASE("adam weight decay pulls toward zero") {
  Mlp net = Mlp::zeros(NetworkSpec{"w", {1, 1}, Activation::kNone, 0});
  net.layers()[0].weight(0, 0) = 2.0;
  AdamState opt(net, AdamConfig{0.01, 0.5, 0.999, 1e-8, 0.1});
  for (int k = 0; k < 10; ++k) opt.step(net, net.zero_gradients(), "w");
  CHECK(net.layers()[0].weight(0, 0) < 2.0);
}
