#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>

#include "oracles.hpp"
#include "sdfa/augmentation.hpp"
#include "sdfa/errors.hpp"
#include "sdfa/gan.hpp"
#include "sdfa/io.hpp"
#include "sdfa/rng.hpp"
#include "support.hpp"

using namespace sdfa;
using sdfa::test::numeric_gradient;
using sdfa::test::relative_error;

namespace {

struct Fixture {
  SyntheticBenchmark bench;
  AttributeGroups groups;
  GanConfig cfg;
  SoftmaxClassifier seen;

  explicit Fixture(LossWeights w = {}) : bench(generate_synthetic_benchmark(test::tiny_spec())) {
    groups.m = 2;
    groups.assignment = bench.ground_truth_groups;
    groups.centroids = Matrix::Zero(2, 4);
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.hidden = 10;
    cfg.seed = 21;
    seen = pretrain_seen_classifier(bench.bundle, ClassifierTraining{5, 8, 1e-2, 3});
    weights = w;
  }
  LossWeights weights;

  SdfaModel model() const {
    return make_model(static_cast<int>(bench.bundle.d_a()), static_cast<int>(bench.bundle.d_x()), groups, weights, seen,
                      cfg);
  }
  Matrix batch_x() const { return bench.bundle.rows(first_train(6)); }
  Matrix batch_a() const {
    Matrix a(6, bench.bundle.d_a());
    const auto idx = first_train(6);
    for (int k = 0; k < 6; ++k) a.row(k) = bench.bundle.attributes.row(bench.bundle.labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])]);
    return a;
  }
  std::vector<ClassId> batch_labels() const { return bench.bundle.labels_at(first_train(6)); }

  std::vector<Eigen::Index> first_train(std::size_t n) const {
    auto idx = bench.bundle.indices(Split::kTrainSeen);
    idx.resize(n);
    return idx;
  }
};

// Gives the self-supervision head non-zero weights so its gradient path is exercised.
void randomize_head(SdfaModel& m, std::uint64_t seed) {
  m.self_sup = nn::Mlp(nn::NetworkSpec{"self_sup", m.self_sup.spec().layer_dims, nn::Activation::kNone, seed});
}

}  // namespace

TEST_CASE("model layout") {
  Fixture f;
  const SdfaModel m = f.model();
  CHECK(m.m() == 2);
  CHECK(m.d_z == m.d_a());
  CHECK(m.generator.input_dim() == 2 * m.d_a());
  CHECK(m.generator.output_dim() == m.d_x());
  CHECK(m.generator.spec().output_activation == nn::Activation::kRelu);
  CHECK(m.critic.input_dim() == m.d_x() + m.d_a());
  CHECK(m.critic.output_dim() == 1);
  CHECK(m.self_sup.output_dim() == 3);
  for (double v : nn::flatten(m.self_sup)) CHECK(v == 0.0);
  CHECK_FALSE(m.trained);
}

TEST_CASE("critic loss gradient matches finite differences") {
  for (bool sampled : {false, true}) {
    Fixture f(LossWeights{10.0, 0.7, 1.0, 0.01, 5});
    const SdfaModel m = f.model();
    const VariantOptions opts{true, false, sampled};
    const auto res = critic_loss(m, f.batch_x(), f.batch_a(), 99, opts);
    auto loss = [&](const std::vector<double>& p) {
      SdfaModel probe = m;
      nn::unflatten(probe.critic, p);
      return critic_loss(probe, f.batch_x(), f.batch_a(), 99, opts).total;
    };
    CHECK(relative_error(nn::flatten(res.grads), numeric_gradient(loss, nn::flatten(m.critic))) <= 1e-3);
  }
}

TEST_CASE("generator loss gradients match finite differences") {
  for (bool include_complete : {true, false}) {
    Fixture f(LossWeights{10.0, 0.6, 0.8, 0.05, 5});
    SdfaModel m = f.model();
    randomize_head(m, 4);
    const VariantOptions opts{include_complete, false, false};
    const auto res = generator_loss(m, f.batch_a(), f.batch_labels(), 17, opts);

    auto g_loss = [&](const std::vector<double>& p) {
      SdfaModel probe = m;
      nn::unflatten(probe.generator, p);
      return generator_loss(probe, f.batch_a(), f.batch_labels(), 17, opts).total;
    };
    CHECK(relative_error(nn::flatten(res.generator_grads), numeric_gradient(g_loss, nn::flatten(m.generator))) <= 1e-3);

    auto h_loss = [&](const std::vector<double>& p) {
      SdfaModel probe = m;
      nn::unflatten(probe.self_sup, p);
      return generator_loss(probe, f.batch_a(), f.batch_labels(), 17, opts).total;
    };
    CHECK(relative_error(nn::flatten(res.self_sup_grads), numeric_gradient(h_loss, nn::flatten(m.self_sup))) <= 1e-4);
  }
}

TEST_CASE("generator loss composition") {
  Fixture f(LossWeights{10.0, 0.5, 2.0, 0.1, 5});
  const SdfaModel m = f.model();
  const auto g = generator_loss(m, f.batch_a(), f.batch_labels(), 5);
  CHECK(g.total == doctest::Approx(g.backbone + 0.5 * g.l_div + 2.0 * g.l_self));
  CHECK(g.backbone == doctest::Approx(g.adversarial + 0.1 * g.cls_ce));
  CHECK(g.l_div == doctest::Approx((g.variant_terms[1] + g.variant_terms[2]) / 2.0));
  CHECK(g.variant_terms[0] == doctest::Approx(g.backbone));
  CHECK(g.l_self == doctest::Approx((g.variant_self[0] + g.variant_self[1] + g.variant_self[2]) / 3.0));
  // Zero-initialised head: uniform softmax, CE = log(m + 1).
  CHECK(g.l_self == doctest::Approx(std::log(3.0)));
  // Argmax ties resolve to class 0, so exactly the complete variant is "right".
  CHECK(g.self_accuracy == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("detached self-supervision leaves the generator gradient alone") {
  Fixture f(LossWeights{10.0, 1.0, 1.0, 0.01, 5});
  SdfaModel m = f.model();
  randomize_head(m, 8);
  const auto attached = generator_loss(m, f.batch_a(), f.batch_labels(), 3, {true, false, false});
  const auto detached = generator_loss(m, f.batch_a(), f.batch_labels(), 3, {true, true, false});
  m.weights.lambda_self = 0.0;
  const auto none = generator_loss(m, f.batch_a(), f.batch_labels(), 3, {true, false, false});
  CHECK(nn::flatten(detached.generator_grads) == nn::flatten(none.generator_grads));
  CHECK_FALSE(nn::flatten(attached.generator_grads) == nn::flatten(none.generator_grads));
  CHECK(nn::flatten(detached.self_sup_grads) == nn::flatten(attached.self_sup_grads));
}

TEST_CASE("zero diversity weight reduces the critic to the backbone") {
  Fixture f(LossWeights{10.0, 0.0, 0.0, 0.0, 5});
  const SdfaModel m = f.model();
  const auto c = critic_loss(m, f.batch_x(), f.batch_a(), 4);
  CHECK(c.total == c.penalty - c.wasserstein);
  CHECK(c.diversity == 0.0);
}

TEST_CASE("self-supervision loss validation") {
  Fixture f;
  const SdfaModel m = f.model();
  CHECK(self_supervision_loss(m.self_sup, Matrix::Zero(2, m.d_x()), {0, 2}) == doctest::Approx(std::log(3.0)));
  CHECK_THROWS_AS(self_supervision_loss(m.self_sup, Matrix::Zero(2, m.d_x()), {0, 3}), ArgumentError);
}

TEST_CASE("untrained head sits at chance 1/(m+1)") {
  Fixture f(LossWeights{10.0, 1.0, 0.0, 0.01, 5});
  SdfaModel m = f.model();
  train(m, f.bench.bundle, f.cfg);
  CHECK(self_supervision_accuracy(m, f.bench.bundle.attributes, 5, 1) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("training log terms and determinism") {
  Fixture f;
  SdfaModel a = f.model();
  SdfaModel b = f.model();
  const auto la = train(a, f.bench.bundle, f.cfg);
  const auto lb = train(b, f.bench.bundle, f.cfg);
  CHECK(la == lb);
  CHECK(a.generator == b.generator);
  CHECK(a.trained);
  const std::vector<std::string> want{"critic_loss", "wasserstein", "gp",     "critic_div", "generator_loss",
                                      "g_backbone",  "g_adv",       "cls_ce", "g_div",      "g_self",
                                      "l_div",       "l_self",      "self_acc"};
  CHECK(la.terms() == want);
  CHECK(la.series("critic_loss").size() == 2);

  test::TempDir dir("log");
  la.write_csv(dir / "log.csv");
  CHECK(TrainingLog::read_csv(dir / "log.csv") == la);
}

TEST_CASE("zero weights are bitwise identical to the plain WGAN-GP path") {
  Fixture f(LossWeights{10.0, 0.0, 0.0, 0.0, 3});
  f.cfg.epochs = 3;
  SdfaModel sdfa = f.model();
  SdfaModel plain = f.model();
  const auto ls = train(sdfa, f.bench.bundle, f.cfg);
  const auto lp = train_plain_wgan_gp(plain, f.bench.bundle, f.cfg);
  for (const auto& term : lp.terms()) {
    const auto a = ls.series(term);
    const auto b = lp.series(term);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::memcmp(&a[k], &b[k], sizeof(double)) == 0);
  }
  CHECK(sdfa.generator == plain.generator);
  CHECK(sdfa.critic == plain.critic);
}

TEST_CASE("observer sees every step and generator cadence") {
  Fixture f;
  SdfaModel m = f.model();
  long steps = 0, gen = 0;
  train(m, f.bench.bundle, f.cfg, [&](const StepRecord& r) {
    ++steps;
    gen += r.generator_step;
    CHECK(r.generator_step == (r.step % 5 == 0));
  });
  const long per_epoch = (32 + 7) / 8;
  CHECK(steps == 2 * per_epoch);
  CHECK(gen == steps / 5);
}

TEST_CASE("checkpoint round trip and resumption") {
  test::TempDir dir("ckpt");
  Fixture f;
  SdfaModel m = f.model();
  train(m, f.bench.bundle, f.cfg);
  save_checkpoint(m, dir / "c", 2);
  SdfaModel back = load_checkpoint(dir / "c");
  CHECK(back.generator == m.generator);
  CHECK(back.critic == m.critic);
  CHECK(back.self_sup == m.self_sup);
  CHECK(back.seen_classifier == m.seen_classifier);
  CHECK(back.groups.assignment == m.groups.assignment);
  CHECK(back.groups.centroids == m.groups.centroids);
  CHECK(back.opt_generator.steps() == m.opt_generator.steps());
  CHECK(back.trained);

  // Continuing both for one more epoch stays in lockstep.
  GanConfig more = f.cfg;
  more.epochs = 1;
  more.seed = 77;
  const auto l1 = train(m, f.bench.bundle, more);
  const auto l2 = train(back, f.bench.bundle, more);
  CHECK(l1 == l2);
  CHECK(m.generator == back.generator);

  CHECK_THROWS_AS(load_checkpoint(dir / "absent"), LoadError);
  io::write_text(dir / "c" / "checkpoint.json", "{\"format\": \"other\"}");
  CHECK_THROWS_AS(load_checkpoint(dir / "c"), LoadError);
}

TEST_CASE("periodic checkpoints") {
  test::TempDir dir("periodic");
  Fixture f;
  f.cfg.checkpoint_every = 1;
  f.cfg.checkpoint_dir = dir.path();
  SdfaModel m = f.model();
  train(m, f.bench.bundle, f.cfg);
  CHECK(std::filesystem::exists(dir / "epoch_0001" / "checkpoint.json"));
  CHECK(std::filesystem::exists(dir / "epoch_0002" / "checkpoint.json"));
}

TEST_CASE("divergence names the failing term") {
  Fixture f;
  f.cfg.checkpoint_every = 1;
  test::TempDir dir("nan");
  f.cfg.checkpoint_dir = dir.path();
  f.cfg.epochs = 3;
  SdfaModel m = f.model();
  // Poison the critic after the first epoch's checkpoint.
  bool poisoned = false;
  try {
    train(m, f.bench.bundle, f.cfg, [&](const StepRecord& r) {
      if (r.step == 5 && !poisoned) {
        poisoned = true;
        m.critic.layers()[0].weight(0, 0) = std::nan("");
      }
    });
    CHECK(false);
  } catch (const TrainingError& e) {
    CHECK(e.code() == 3);
    CHECK_FALSE(e.term.empty());
    CHECK(std::string(e.what()).find("epoch_0001") != std::string::npos);
  }
}

TEST_CASE("loss weight validation") {
  Fixture f(LossWeights{10.0, -1.0, 1.0, 0.01, 5});
  CHECK_THROWS_AS(validate(f.weights), ArgumentError);
  CHECK_THROWS_AS(validate(LossWeights{10.0, 1.0, 1.0, 0.01, 0}), ArgumentError);
}

TEST_CASE("batch shape errors") {
  Fixture f;
  const SdfaModel m = f.model();
  CHECK_THROWS_AS(critic_loss(m, f.batch_x(), Matrix::Zero(6, 3), 1), ShapeError);
  CHECK_THROWS_AS(critic_loss(m, Matrix::Zero(0, m.d_x()), Matrix::Zero(0, m.d_a()), 1), ArgumentError);
  CHECK_THROWS_AS(generator_loss(m, f.batch_a(), {0}, 1), ShapeError);
  CHECK_THROWS_AS(generator_loss(m, f.batch_a(), std::vector<ClassId>(6, 5), 1), ArgumentError);
}

TEST_CASE("seen classifier pretraining") {
  Fixture f;
  double acc = 0.0;
  const auto clf = pretrain_seen_classifier(f.bench.bundle, ClassifierTraining{30, 8, 1e-2, 1}, &acc);
  CHECK(clf.classes() == f.bench.bundle.seen_classes);
  CHECK(acc > 0.8);
}
