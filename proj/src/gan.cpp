#include "sdfa/gan.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "json.hpp"

#include "sdfa/errors.hpp"
#include "sdfa/io.hpp"

namespace sdfa {

namespace fs = std::filesystem;
using json = nlohmann::json;

void validate(const LossWeights& w) {
  if (!(w.lambda_gp >= 0.0) || !(w.lambda_div >= 0.0) || !(w.lambda_self >= 0.0) || !(w.beta_cls >= 0.0))
    throw ArgumentError("loss weights must be >= 0");
  if (w.critic_steps < 1) throw ArgumentError("critic_steps must be >= 1");
}

Matrix SdfaModel::generate(const Matrix& attributes, rng::Engine& eng) const {
  const Matrix z = rng::normal(eng, attributes.rows(), d_z);
  return generator.forward(nn::hconcat(attributes, z));
}

SdfaModel make_model(int d_a, int d_x, const AttributeGroups& groups, const LossWeights& weights,
                     SoftmaxClassifier seen_classifier, const GanConfig& cfg) {
  validate(weights);
  if (static_cast<int>(groups.assignment.size()) != d_a) throw ShapeError("groups do not cover d_a dimensions");
  if (cfg.hidden < 1) throw ArgumentError("hidden width must be >= 1");
  SdfaModel model;
  model.groups = groups;
  model.weights = weights;
  model.d_z = cfg.d_z > 0 ? cfg.d_z : d_a;
  model.generator = nn::Mlp({"generator", {d_a + model.d_z, cfg.hidden, d_x}, nn::Activation::kRelu, cfg.seed});
  model.critic = nn::Mlp({"critic", {d_x + d_a, cfg.hidden, 1}, nn::Activation::kNone, cfg.seed});
  model.self_sup = nn::Mlp::zeros({"self_sup", {d_x, groups.m + 1}, nn::Activation::kNone, cfg.seed});
  model.seen_classifier = std::move(seen_classifier);
  model.opt_generator = nn::AdamState(
      model.generator, {cfg.lr_generator, cfg.beta1, cfg.beta2, 1e-8, cfg.generator_weight_decay});
  model.opt_critic = nn::AdamState(model.critic, {cfg.lr_critic, cfg.beta1, cfg.beta2, 1e-8, 0.0});
  model.opt_self_sup = nn::AdamState(model.self_sup, {cfg.lr_self_sup, cfg.beta1, cfg.beta2, 1e-8, 0.0});
  return model;
}

SoftmaxClassifier pretrain_seen_classifier(const DatasetBundle& bundle, const ClassifierTraining& cfg,
                                           double* train_accuracy) {
  if (bundle.seen_classes.size() < 2) throw ValidationError("at least two seen classes are required");
  const auto idx = bundle.indices(Split::kTrainSeen);
  if (idx.empty()) throw ValidationError("train_seen split is empty");
  const auto labels = bundle.labels_at(idx);
  for (ClassId c : bundle.seen_classes)
    if (std::find(labels.begin(), labels.end(), c) == labels.end())
      throw ValidationError("seen class " + std::to_string(c) + " has zero training instances");
  SoftmaxClassifier clf("seen_classifier", static_cast<int>(bundle.d_x()), bundle.seen_classes, cfg.seed);
  const double acc = train_classifier(clf, bundle.rows(idx), labels, cfg);
  if (train_accuracy) *train_accuracy = acc;
  return clf;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix interpolate(const Matrix& real, const Matrix& fake, const Matrix& alpha) {
  return (real.array().colwise() * alpha.col(0).array() + fake.array().colwise() * (1.0 - alpha.col(0).array()))
      .matrix();
}

// Masked groups used this step (ascending).
std::vector<int> masked_variants(int m, std::uint64_t noise_seed, bool sampled) {
  std::vector<int> out;
  if (sampled) {
    auto eng = rng::stream(noise_seed, "mask");
    out.push_back(std::uniform_int_distribution<int>(1, m)(eng));
  } else {
    for (int i = 1; i <= m; ++i) out.push_back(i);
  }
  return out;
}

struct FakeTerm {
  double fake_mean = 0.0;
  nn::PenaltyResult penalty;
  nn::Gradients fake_grads;
};

// mean D(G(a^i, z), a^i) and lambda * GP_i for one variant. Masked variants
// are scored against real pairs with the complete attribute, so their
// interpolates also blend the condition and the penalty covers both blocks;
// otherwise the critic can grow without bound along the condition.
FakeTerm critic_fake_term(const SdfaModel& model, const Matrix& real_x, const Matrix& real_a, const Matrix& cond,
                          int variant, std::uint64_t noise_seed) {
  const Eigen::Index n = real_x.rows();
  auto z_eng = rng::stream(noise_seed, "z", {static_cast<std::uint64_t>(variant)});
  const Matrix fake = model.generate(cond, z_eng);
  FakeTerm t;
  nn::ForwardCache cache;
  t.fake_mean = model.critic.forward(nn::hconcat(fake, cond), cache).mean();
  t.fake_grads = model.critic.backward(cache, Matrix::Constant(n, 1, 1.0 / static_cast<double>(n)));
  auto a_eng = rng::stream(noise_seed, "alpha", {static_cast<std::uint64_t>(variant)});
  const Matrix alpha = rng::uniform(a_eng, n, 1);
  if (variant == 0)
    t.penalty = nn::penalty_gradients(model.critic, interpolate(real_x, fake, alpha), cond, model.weights.lambda_gp);
  else
    t.penalty = nn::penalty_gradients(model.critic, interpolate(real_x, fake, alpha), interpolate(real_a, cond, alpha),
                                      model.weights.lambda_gp, true);
  return t;
}

void check_batch(const SdfaModel& model, const Matrix& x, const Matrix& a) {
  if (x.rows() == 0) throw ArgumentError("empty batch");
  if (x.rows() != a.rows()) throw ShapeError("feature/attribute batch mismatch");
  if (x.cols() != model.d_x()) throw ShapeError("feature width does not match the generator output");
  if (a.cols() != model.d_a()) throw ShapeError("attribute width does not match the model");
}

}  // namespace

CriticLoss critic_loss(const SdfaModel& model, const Matrix& real_x, const Matrix& real_a, std::uint64_t noise_seed,
                       const VariantOptions& opts) {
  check_batch(model, real_x, real_a);
  const Eigen::Index n = real_x.rows();
  const LossWeights& w = model.weights;

  CriticLoss out;
  nn::ForwardCache real_cache;
  const double real_mean = model.critic.forward(nn::hconcat(real_x, real_a), real_cache).mean();
  const nn::Gradients real_grads =
      model.critic.backward(real_cache, Matrix::Constant(n, 1, -1.0 / static_cast<double>(n)));

  // Backbone: complete attributes.
  const FakeTerm base = critic_fake_term(model, real_x, real_a, mask_group_rows(real_a, model.groups, 0), 0, noise_seed);
  out.wasserstein = real_mean - base.fake_mean;
  out.penalty = base.penalty.value;
  out.total = base.fake_mean - real_mean + base.penalty.value;
  out.grads = real_grads;
  out.grads.add_scaled(base.fake_grads, 1.0);
  out.grads.add_scaled(base.penalty.grads, 1.0);

  if (w.lambda_div > 0.0) {
    const auto variants = masked_variants(model.m(), noise_seed, opts.sampled_masks);
    const double inv = 1.0 / static_cast<double>(variants.size());
    nn::Gradients div = model.critic.zero_gradients();
    double value = 0.0;
    for (int i : variants) {
      const FakeTerm t = critic_fake_term(model, real_x, real_a, mask_group_rows(real_a, model.groups, i), i, noise_seed);
      value += t.fake_mean + t.penalty.value;
      div.add_scaled(t.fake_grads, inv);
      div.add_scaled(t.penalty.grads, inv);
    }
    div.add_scaled(real_grads, 1.0);
    out.diversity = value * inv - real_mean;
    out.total += w.lambda_div * out.diversity;
    out.grads.add_scaled(div, w.lambda_div);
  }
  return out;
}

double self_supervision_loss(const nn::Mlp& head, const Matrix& generated, const std::vector<int>& labels) {
  for (int h : labels)
    if (h < 0 || h >= head.output_dim())
      throw ArgumentError("self-supervision label " + std::to_string(h) + " outside 0.." +
                          std::to_string(head.output_dim() - 1));
  return nn::softmax_cross_entropy(head.forward(generated), labels, nullptr);
}

GeneratorLoss generator_loss(const SdfaModel& model, const Matrix& class_a, const std::vector<ClassId>& labels,
                             std::uint64_t noise_seed, const VariantOptions& opts) {
  if (class_a.rows() == 0) throw ArgumentError("empty batch");
  if (class_a.cols() != model.d_a()) throw ShapeError("attribute width does not match the model");
  if (static_cast<Eigen::Index>(labels.size()) != class_a.rows()) throw ShapeError("label count mismatch");
  const Eigen::Index n = class_a.rows();
  const Eigen::Index dx = model.d_x();
  const LossWeights& w = model.weights;
  const std::vector<int> targets = model.seen_classifier.indices_of(labels);
  const int m = model.m();

  std::vector<int> variants{0};
  for (int i : masked_variants(m, noise_seed, opts.sampled_masks)) variants.push_back(i);
  std::vector<int> self_set;
  for (int i : variants)
    if (i > 0 || opts.self_sup_includes_complete) self_set.push_back(i);
  const double self_weight = self_set.empty() ? 0.0 : w.lambda_self / static_cast<double>(self_set.size());
  const double div_count = static_cast<double>(variants.size() - 1);
  const bool self_into_generator = w.lambda_self != 0.0 && !opts.detach_self_sup;

  GeneratorLoss out;
  out.variant_terms.assign(static_cast<std::size_t>(m + 1), kNaN);
  out.variant_self.assign(static_cast<std::size_t>(m + 1), kNaN);
  out.generator_grads = model.generator.zero_gradients();
  out.self_sup_grads = model.self_sup.zero_gradients();
  double div_sum = 0.0;
  double self_sum = 0.0;
  std::size_t self_correct = 0;

  for (int i : variants) {
    const Matrix cond = mask_group_rows(class_a, model.groups, i);
    auto z_eng = rng::stream(noise_seed, "z", {static_cast<std::uint64_t>(i)});
    const Matrix z = rng::normal(z_eng, n, model.d_z);
    nn::ForwardCache g_cache;
    const Matrix fake = model.generator.forward(nn::hconcat(cond, z), g_cache);

    nn::ForwardCache d_cache;
    const double adv = -model.critic.forward(nn::hconcat(fake, cond), d_cache).mean();
    const Matrix d_adv =
        model.critic.backward(d_cache, Matrix::Constant(n, 1, -1.0 / static_cast<double>(n))).input.leftCols(dx);

    nn::ForwardCache c_cache;
    Matrix ce_adj;
    const double ce = nn::softmax_cross_entropy(model.seen_classifier.net().forward(fake, c_cache), targets, &ce_adj);
    const Matrix d_ce = model.seen_classifier.net().backward(c_cache, ce_adj).input;

    const double term = adv + w.beta_cls * ce;
    out.variant_terms[static_cast<std::size_t>(i)] = term;

    Matrix d_fake;
    if (i == 0) {
      out.adversarial = adv;
      out.cls_ce = ce;
      out.backbone = term;
      d_fake = d_adv;
      if (w.beta_cls != 0.0) d_fake += w.beta_cls * d_ce;
    } else {
      div_sum += term;
      d_fake = Matrix::Zero(n, dx);
      if (w.lambda_div != 0.0) {
        d_fake = d_adv;
        if (w.beta_cls != 0.0) d_fake += w.beta_cls * d_ce;
        d_fake *= w.lambda_div / div_count;
      }
    }

    if (std::find(self_set.begin(), self_set.end(), i) != self_set.end()) {
      nn::ForwardCache h_cache;
      const Matrix logits = model.self_sup.forward(fake, h_cache);
      Matrix h_adj;
      const double self_ce = nn::softmax_cross_entropy(logits, std::vector<int>(static_cast<std::size_t>(n), i), &h_adj);
      out.variant_self[static_cast<std::size_t>(i)] = self_ce;
      self_sum += self_ce;
      for (int k : nn::argmax_rows(logits)) self_correct += k == i;
      if (w.lambda_self != 0.0) {
        const nn::Gradients hg = model.self_sup.backward(h_cache, h_adj);
        out.self_sup_grads.add_scaled(hg, self_weight);
        if (self_into_generator) d_fake += self_weight * hg.input;
      }
    }

    const bool contributes = i == 0 || w.lambda_div != 0.0 || self_into_generator;
    if (contributes) out.generator_grads.add_scaled(model.generator.backward(g_cache, d_fake), 1.0);
  }

  out.l_div = div_count > 0 ? div_sum / div_count : 0.0;
  out.l_self = self_set.empty() ? 0.0 : self_sum / static_cast<double>(self_set.size());
  out.self_accuracy =
      self_set.empty() ? 0.0 : static_cast<double>(self_correct) / static_cast<double>(self_set.size() * n);
  out.total = out.backbone + w.lambda_div * out.l_div + w.lambda_self * out.l_self;
  return out;
}

double self_supervision_accuracy(const SdfaModel& model, const Matrix& attributes, int n_per_variant,
                                 std::uint64_t seed) {
  if (n_per_variant < 1 || attributes.rows() == 0) throw ArgumentError("nothing to evaluate");
  std::size_t correct = 0;
  std::size_t total = 0;
  for (int i = 0; i <= model.m(); ++i) {
    Matrix cond(attributes.rows() * n_per_variant, attributes.cols());
    for (Eigen::Index c = 0; c < attributes.rows(); ++c)
      for (int k = 0; k < n_per_variant; ++k) cond.row(c * n_per_variant + k) = attributes.row(c);
    cond = mask_group_rows(cond, model.groups, i);
    auto eng = rng::stream(seed, "self_sup_eval", {static_cast<std::uint64_t>(i)});
    const Matrix fake = model.generate(cond, eng);
    for (int k : nn::argmax_rows(model.self_sup.forward(fake))) correct += k == i;
    total += static_cast<std::size_t>(cond.rows());
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<double> TrainingLog::series(const std::string& term) const {
  std::vector<double> out;
  for (const auto& e : entries)
    if (e.term == term) out.push_back(e.value);
  return out;
}

std::vector<std::string> TrainingLog::terms() const {
  std::vector<std::string> out;
  for (const auto& e : entries)
    if (std::find(out.begin(), out.end(), e.term) == out.end()) out.push_back(e.term);
  return out;
}

void TrainingLog::write_csv(const fs::path& path) const {
  io::CsvTable csv{{"epoch", "term", "value"}, {}};
  for (const auto& e : entries) csv.rows.push_back({std::to_string(e.epoch), e.term, io::format_double(e.value)});
  io::write_csv(path, csv);
}

TrainingLog TrainingLog::read_csv(const fs::path& path) {
  const auto csv = io::read_csv(path);
  TrainingLog log;
  for (const auto& r : csv.rows)
    log.add(static_cast<int>(io::parse_int(r[0], path.string())), r[1], io::parse_double(r[2], path.string()));
  return log;
}

namespace {

// Running means of named terms in first-seen order.
class EpochMeans {
 public:
  void add(const std::string& term, double v) {
    for (auto& t : terms_)
      if (t.name == term) {
        t.sum += v;
        ++t.count;
        return;
      }
    terms_.push_back({term, v, 1});
  }
  void flush(TrainingLog& log, int epoch) {
    for (const auto& t : terms_) log.add(epoch, t.name, t.sum / static_cast<double>(t.count));
    terms_.clear();
  }

 private:
  struct Term {
    std::string name;
    double sum;
    long count;
  };
  std::vector<Term> terms_;
};

void require_finite(double v, const std::string& term, long step) {
  if (!std::isfinite(v)) throw TrainingError(term, "non-finite value at step " + std::to_string(step));
}

struct Batch {
  Matrix x;
  Matrix a;
  std::vector<ClassId> labels;
};

struct LoopHooks {
  std::function<void(long step, const Batch&, EpochMeans&, StepRecord&)> critic_step;
  std::function<void(long step, const Batch&, EpochMeans&, StepRecord&)> generator_step;
};

TrainingLog run_loop(SdfaModel& model, const DatasetBundle& bundle, const GanConfig& cfg, const LoopHooks& hooks,
                     const StepObserver& observer) {
  validate(model.weights);
  if (cfg.epochs < 0 || cfg.batch_size < 1) throw ArgumentError("invalid GAN training schedule");
  const auto train_idx = bundle.indices(Split::kTrainSeen);
  if (train_idx.empty()) throw ValidationError("train_seen split is empty");

  TrainingLog log;
  std::string last_checkpoint;
  std::vector<std::size_t> order(train_idx.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto eng = rng::stream(cfg.seed, "gan/epoch", {static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), eng);
    EpochMeans means;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Batch b;
      b.x.resize(static_cast<Eigen::Index>(end - start), bundle.d_x());
      b.a.resize(static_cast<Eigen::Index>(end - start), bundle.d_a());
      for (std::size_t k = start; k < end; ++k) {
        const auto row = train_idx[order[k]];
        const ClassId c = bundle.labels[static_cast<std::size_t>(row)];
        b.x.row(static_cast<Eigen::Index>(k - start)) = bundle.features.row(row);
        b.a.row(static_cast<Eigen::Index>(k - start)) = bundle.attributes.row(c);
        b.labels.push_back(c);
      }
      ++step;
      StepRecord rec;
      rec.step = step;
      try {
        hooks.critic_step(step, b, means, rec);
        if (step % model.weights.critic_steps == 0) {
          rec.generator_step = true;
          hooks.generator_step(step, b, means, rec);
        }
      } catch (const TrainingError& e) {
        throw TrainingError(e.term, std::string(e.what()) +
                                        "; last good checkpoint: " + (last_checkpoint.empty() ? "none" : last_checkpoint));
      }
      if (observer) observer(rec);
    }
    means.flush(log, epoch);
    if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 && !cfg.checkpoint_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04d", epoch);
      const fs::path dir = cfg.checkpoint_dir / name;
      save_checkpoint(model, dir, epoch);
      last_checkpoint = dir.string();
    }
  }
  model.trained = true;
  return log;
}

}  // namespace

TrainingLog train(SdfaModel& model, const DatasetBundle& bundle, const GanConfig& cfg, const StepObserver& observer) {
  const VariantOptions opts{cfg.self_sup_includes_complete, cfg.detach_self_sup, cfg.sampled_masks};
  LoopHooks hooks;
  hooks.critic_step = [&](long step, const Batch& b, EpochMeans& means, StepRecord& rec) {
    rec.critic = critic_loss(model, b.x, b.a, rng::derive(cfg.seed, "gan/critic", {static_cast<std::uint64_t>(step)}),
                             opts);
    const CriticLoss& c = rec.critic;
    for (auto [name, v] : {std::pair{"critic_loss", c.total}, {"wasserstein", c.wasserstein}, {"gp", c.penalty},
                           {"critic_div", c.diversity}}) {
      require_finite(v, name, step);
      means.add(name, v);
    }
    model.opt_critic.step(model.critic, c.grads, "critic_loss");
  };
  hooks.generator_step = [&](long step, const Batch& b, EpochMeans& means, StepRecord& rec) {
    rec.generator = generator_loss(model, b.a, b.labels,
                                   rng::derive(cfg.seed, "gan/generator", {static_cast<std::uint64_t>(step)}), opts);
    const GeneratorLoss& g = rec.generator;
    const LossWeights& w = model.weights;
    for (auto [name, v] : {std::pair{"generator_loss", g.total}, {"g_backbone", g.backbone}, {"g_adv", g.adversarial},
                           {"cls_ce", g.cls_ce}, {"g_div", g.weighted_div(w)}, {"g_self", g.weighted_self(w)},
                           {"l_div", g.l_div}, {"l_self", g.l_self}, {"self_acc", g.self_accuracy}}) {
      require_finite(v, name, step);
      means.add(name, v);
    }
    model.opt_generator.step(model.generator, g.generator_grads, "generator_loss");
    model.opt_self_sup.step(model.self_sup, g.self_sup_grads, "l_self");
  };
  return run_loop(model, bundle, cfg, hooks, observer);
}

TrainingLog train_plain_wgan_gp(SdfaModel& model, const DatasetBundle& bundle, const GanConfig& cfg) {
  const LossWeights& w = model.weights;
  LoopHooks hooks;
  hooks.critic_step = [&](long step, const Batch& b, EpochMeans& means, StepRecord&) {
    const std::uint64_t noise_seed = rng::derive(cfg.seed, "gan/critic", {static_cast<std::uint64_t>(step)});
    const Eigen::Index n = b.x.rows();
    nn::ForwardCache real_cache;
    const double real_mean = model.critic.forward(nn::hconcat(b.x, b.a), real_cache).mean();
    nn::Gradients grads = model.critic.backward(real_cache, Matrix::Constant(n, 1, -1.0 / static_cast<double>(n)));

    auto z_eng = rng::stream(noise_seed, "z", {0});
    const Matrix fake = model.generate(b.a, z_eng);
    nn::ForwardCache fake_cache;
    const double fake_mean = model.critic.forward(nn::hconcat(fake, b.a), fake_cache).mean();
    grads.add_scaled(model.critic.backward(fake_cache, Matrix::Constant(n, 1, 1.0 / static_cast<double>(n))), 1.0);

    auto a_eng = rng::stream(noise_seed, "alpha", {0});
    const Matrix alpha = rng::uniform(a_eng, n, 1);
    const auto gp = nn::penalty_gradients(model.critic, interpolate(b.x, fake, alpha), b.a, w.lambda_gp);
    grads.add_scaled(gp.grads, 1.0);

    const double total = fake_mean - real_mean + gp.value;
    for (auto [name, v] : {std::pair{"critic_loss", total}, {"wasserstein", real_mean - fake_mean}, {"gp", gp.value}}) {
      require_finite(v, name, step);
      means.add(name, v);
    }
    model.opt_critic.step(model.critic, grads, "critic_loss");
  };
  hooks.generator_step = [&](long step, const Batch& b, EpochMeans& means, StepRecord&) {
    const std::uint64_t noise_seed = rng::derive(cfg.seed, "gan/generator", {static_cast<std::uint64_t>(step)});
    const Eigen::Index n = b.a.rows();
    auto z_eng = rng::stream(noise_seed, "z", {0});
    const Matrix z = rng::normal(z_eng, n, model.d_z);
    nn::ForwardCache g_cache;
    const Matrix fake = model.generator.forward(nn::hconcat(b.a, z), g_cache);

    nn::ForwardCache d_cache;
    const double adv = -model.critic.forward(nn::hconcat(fake, b.a), d_cache).mean();
    Matrix d_fake = model.critic.backward(d_cache, Matrix::Constant(n, 1, -1.0 / static_cast<double>(n)))
                        .input.leftCols(model.d_x());

    nn::ForwardCache c_cache;
    Matrix ce_adj;
    const double ce = nn::softmax_cross_entropy(model.seen_classifier.net().forward(fake, c_cache),
                                                model.seen_classifier.indices_of(b.labels), &ce_adj);
    if (w.beta_cls != 0.0) d_fake += w.beta_cls * model.seen_classifier.net().backward(c_cache, ce_adj).input;

    const double total = adv + w.beta_cls * ce;
    for (auto [name, v] : {std::pair{"generator_loss", total}, {"g_backbone", total}, {"g_adv", adv}, {"cls_ce", ce}}) {
      require_finite(v, name, step);
      means.add(name, v);
    }
    nn::Gradients grads = model.generator.zero_gradients();
    grads.add_scaled(model.generator.backward(g_cache, d_fake), 1.0);
    model.opt_generator.step(model.generator, grads, "generator_loss");
  };
  return run_loop(model, bundle, cfg, hooks, {});
}

namespace {

void write_blob(const fs::path& path, const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint blob " + path.string());
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<double> read_blob(const fs::path& path) {
  const std::string bytes = io::read_text(path);
  if (bytes.size() % sizeof(double) != 0) throw LoadError("truncated checkpoint blob " + path.string());
  std::vector<double> values(bytes.size() / sizeof(double));
  std::memcpy(values.data(), bytes.data(), bytes.size());
  return values;
}

json network_entry(const nn::Mlp& net, const nn::AdamState* opt, const fs::path& dir) {
  const std::string name = net.spec().name;
  json j;
  j["layer_dims"] = net.spec().layer_dims;
  j["output_activation"] = nn::to_string(net.spec().output_activation);
  j["init_seed"] = net.spec().init_seed;
  j["params"] = name + ".params.bin";
  write_blob(dir / (name + ".params.bin"), nn::flatten(net));
  if (opt) {
    const auto& c = opt->config();
    j["adam"] = {{"learning_rate", c.learning_rate}, {"beta1", c.beta1},   {"beta2", c.beta2},
                 {"epsilon", c.epsilon},             {"weight_decay", c.weight_decay}, {"steps", opt->steps()},
                 {"m", name + ".adam_m.bin"},        {"v", name + ".adam_v.bin"}};
    write_blob(dir / (name + ".adam_m.bin"), nn::flatten(opt->first_moment()));
    write_blob(dir / (name + ".adam_v.bin"), nn::flatten(opt->second_moment()));
  }
  return j;
}

nn::Mlp restore_network(const std::string& name, const json& j, const fs::path& dir, nn::AdamState* opt) {
  nn::Mlp net = nn::Mlp::zeros({name, j.at("layer_dims").get<std::vector<int>>(),
                                nn::activation_from_string(j.at("output_activation").get<std::string>()),
                                j.at("init_seed").get<std::uint64_t>()});
  const auto params = read_blob(dir / j.at("params").get<std::string>());
  nn::unflatten(net, params);
  if (opt && j.contains("adam")) {
    const json& a = j["adam"];
    *opt = nn::AdamState(net, {a.at("learning_rate").get<double>(), a.at("beta1").get<double>(),
                               a.at("beta2").get<double>(), a.at("epsilon").get<double>(),
                               a.at("weight_decay").get<double>()});
    nn::Gradients m = net.zero_gradients();
    nn::Gradients v = net.zero_gradients();
    nn::unflatten(m, read_blob(dir / a.at("m").get<std::string>()));
    nn::unflatten(v, read_blob(dir / a.at("v").get<std::string>()));
    opt->restore(a.at("steps").get<long>(), std::move(m), std::move(v));
  }
  return net;
}

}  // namespace

void save_checkpoint(const SdfaModel& model, const fs::path& dir, int epoch) {
  io::ensure_directory(dir);
  json manifest;
  manifest["format"] = "sdfa-checkpoint";
  manifest["version"] = 1;
  manifest["epoch"] = epoch;
  manifest["trained"] = model.trained;
  manifest["d_z"] = model.d_z;
  manifest["weights"] = {{"lambda_gp", model.weights.lambda_gp},
                         {"lambda_div", model.weights.lambda_div},
                         {"lambda_self", model.weights.lambda_self},
                         {"beta_cls", model.weights.beta_cls},
                         {"critic_steps", model.weights.critic_steps}};
  std::vector<double> centroids(model.groups.centroids.data(),
                                model.groups.centroids.data() + model.groups.centroids.size());
  manifest["groups"] = {{"m", model.groups.m},
                        {"assignment", model.groups.assignment},
                        {"objective", model.groups.objective},
                        {"centroid_cols", model.groups.centroids.cols()},
                        {"centroids", "groups.centroids.bin"}};
  write_blob(dir / "groups.centroids.bin", centroids);
  manifest["networks"]["generator"] = network_entry(model.generator, &model.opt_generator, dir);
  manifest["networks"]["critic"] = network_entry(model.critic, &model.opt_critic, dir);
  manifest["networks"]["self_sup"] = network_entry(model.self_sup, &model.opt_self_sup, dir);
  manifest["networks"]["seen_classifier"] = network_entry(model.seen_classifier.net(), nullptr, dir);
  manifest["seen_classes"] = model.seen_classifier.classes();
  io::write_text(dir / "checkpoint.json", manifest.dump(2) + "\n");
}

SdfaModel load_checkpoint(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(io::read_text(dir / "checkpoint.json"));
  } catch (const json::exception& e) {
    throw LoadError("malformed checkpoint " + dir.string() + ": " + e.what());
  }
  try {
    if (manifest.value("format", "") != "sdfa-checkpoint" || manifest.value("version", 0) != 1)
      throw LoadError("unsupported checkpoint format in " + dir.string());
    SdfaModel model;
    model.trained = manifest.at("trained").get<bool>();
    model.d_z = manifest.at("d_z").get<int>();
    const json& w = manifest.at("weights");
    model.weights = {w.at("lambda_gp").get<double>(), w.at("lambda_div").get<double>(),
                     w.at("lambda_self").get<double>(), w.at("beta_cls").get<double>(),
                     w.at("critic_steps").get<int>()};
    const json& g = manifest.at("groups");
    model.groups.m = g.at("m").get<int>();
    model.groups.assignment = g.at("assignment").get<std::vector<int>>();
    model.groups.objective = g.at("objective").get<double>();
    const auto centroids = read_blob(dir / g.at("centroids").get<std::string>());
    model.groups.centroids =
        Eigen::Map<const Matrix>(centroids.data(), model.groups.m, g.at("centroid_cols").get<Eigen::Index>());
    const json& nets = manifest.at("networks");
    model.generator = restore_network("generator", nets.at("generator"), dir, &model.opt_generator);
    model.critic = restore_network("critic", nets.at("critic"), dir, &model.opt_critic);
    model.self_sup = restore_network("self_sup", nets.at("self_sup"), dir, &model.opt_self_sup);
    const auto classes = manifest.at("seen_classes").get<std::vector<ClassId>>();
    const json& sc = nets.at("seen_classifier");
    model.seen_classifier = SoftmaxClassifier("seen_classifier", sc.at("layer_dims")[0].get<int>(), classes,
                                              sc.at("init_seed").get<std::uint64_t>());
    model.seen_classifier.net() = restore_network("seen_classifier", sc, dir, nullptr);
    return model;
  } catch (const json::exception& e) {
    throw LoadError("malformed checkpoint " + dir.string() + ": " + e.what());
  }
}

}  // namespace sdfa
