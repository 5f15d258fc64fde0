#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sdfa/augmentation.hpp"
#include "sdfa/classifier.hpp"
#include "sdfa/grouping.hpp"
#include "sdfa/network.hpp"
#include "sdfa/rng.hpp"

namespace sdfa {

struct LossWeights {
  double lambda_gp = 10.0;
  double lambda_div = 1.0;
  double lambda_self = 1.0;
  double beta_cls = 0.01;
  int critic_steps = 5;
};

void validate(const LossWeights& w);

struct GanConfig {
  int epochs = 150;
  int batch_size = 64;
  int hidden = 128;
  int d_z = 0;  // 0 selects d_a
  double lr_generator = 1e-3;
  double lr_critic = 1e-3;
  double lr_self_sup = 1e-3;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double generator_weight_decay = 1e-4;
  bool self_sup_includes_complete = true;
  bool detach_self_sup = false;
  bool sampled_masks = false;
  int checkpoint_every = 0;  // epochs; 0 disables periodic checkpoints
  std::filesystem::path checkpoint_dir;
  ClassifierTraining seen_classifier{30, 64, 1e-2, 0};
  std::uint64_t seed = 0;
};

struct SdfaModel {
  nn::Mlp generator;       // [a ; z] -> x, rectifier output
  nn::Mlp critic;          // [x ; a] -> scalar
  nn::Mlp self_sup;        // x -> m+1 logits, zero initialised
  SoftmaxClassifier seen_classifier;
  AttributeGroups groups;
  LossWeights weights;
  int d_z = 0;
  nn::AdamState opt_generator;
  nn::AdamState opt_critic;
  nn::AdamState opt_self_sup;
  bool trained = false;

  int m() const { return groups.m; }
  int d_a() const { return static_cast<int>(groups.assignment.size()); }
  int d_x() const { return generator.output_dim(); }

  /// G(a, z) for a batch of attribute rows; z drawn from `eng`.
  Matrix generate(const Matrix& attributes, rng::Engine& eng) const;
};

/// Fresh model: seeded G and D, zero self-supervision head, and the given
/// pretrained seen-class classifier.
SdfaModel make_model(int d_a, int d_x, const AttributeGroups& groups, const LossWeights& weights,
                     SoftmaxClassifier seen_classifier, const GanConfig& cfg);

SoftmaxClassifier pretrain_seen_classifier(const DatasetBundle& bundle, const ClassifierTraining& cfg,
                                           double* train_accuracy = nullptr);

struct CriticLoss {
  double total = 0.0;
  double wasserstein = 0.0;  // mean D(real) - mean D(fake^0)
  double penalty = 0.0;      // lambda * GP on the complete variant
  double diversity = 0.0;    // (1/m) sum_i [mean D(fake^i) + lambda GP_i] - mean D(real)
  nn::Gradients grads;
};

struct VariantOptions {
  bool self_sup_includes_complete = true;
  bool detach_self_sup = false;
  bool sampled_masks = false;  // one random masked group per step instead of all m
};

/// Critic objective on a real batch (x, a); noise and interpolation weights
/// come from substreams of `noise_seed` keyed per variant.
CriticLoss critic_loss(const SdfaModel& model, const Matrix& real_x, const Matrix& real_a, std::uint64_t noise_seed,
                       const VariantOptions& opts = {});

struct GeneratorLoss {
  double total = 0.0;
  double backbone = 0.0;    // -mean D(x^0', a^0) + beta * CE_0
  double adversarial = 0.0; // -mean D(x^0', a^0)
  double cls_ce = 0.0;      // CE_0 of the seen classifier
  double l_div = 0.0;       // (1/m) sum_{i>=1} [-mean D(x^i', a^i) + beta * CE_i]
  double l_self = 0.0;
  double self_accuracy = 0.0;
  std::vector<double> variant_terms;  // per group index: -mean D(x^i', a^i) + beta * CE_i (NaN if not computed)
  std::vector<double> variant_self;   // per group index: self-supervision CE (NaN if not in the variant set)
  nn::Gradients generator_grads;
  nn::Gradients self_sup_grads;

  double weighted_div(const LossWeights& w) const { return w.lambda_div * l_div; }
  double weighted_self(const LossWeights& w) const { return w.lambda_self * l_self; }
};

/// Generator objective for class attributes `class_a` with seen-classifier
/// targets `labels` (class ids).
GeneratorLoss generator_loss(const SdfaModel& model, const Matrix& class_a, const std::vector<ClassId>& labels,
                             std::uint64_t noise_seed, const VariantOptions& opts = {});

/// Mean categorical cross-entropy of the head's softmax against labels 0..m.
double self_supervision_loss(const nn::Mlp& head, const Matrix& generated, const std::vector<int>& labels);

/// Accuracy of the head at identifying the masked group on freshly generated
/// variants of `attributes` rows (n_per_variant draws per class and variant).
double self_supervision_accuracy(const SdfaModel& model, const Matrix& attributes, int n_per_variant,
                                 std::uint64_t seed);

struct LogEntry {
  int epoch = 0;
  std::string term;
  double value = 0.0;
  bool operator==(const LogEntry&) const = default;
};

struct TrainingLog {
  std::vector<LogEntry> entries;

  void add(int epoch, std::string term, double value) { entries.push_back({epoch, std::move(term), value}); }
  std::vector<double> series(const std::string& term) const;
  std::vector<std::string> terms() const;
  void write_csv(const std::filesystem::path& path) const;
  static TrainingLog read_csv(const std::filesystem::path& path);
  bool operator==(const TrainingLog&) const = default;
};

struct StepRecord {
  long step = 0;
  bool generator_step = false;
  CriticLoss critic;
  GeneratorLoss generator;
};

using StepObserver = std::function<void(const StepRecord&)>;

/// Alternates critic_steps critic updates (one minibatch of train_seen each)
/// with one generator + self-supervision head update.
TrainingLog train(SdfaModel& model, const DatasetBundle& bundle, const GanConfig& cfg,
                  const StepObserver& observer = {});

/// Plain conditional WGAN-GP (complete attributes only, no diversity or
/// self-supervision terms) sharing the model layout and random streams.
TrainingLog train_plain_wgan_gp(SdfaModel& model, const DatasetBundle& bundle, const GanConfig& cfg);

void save_checkpoint(const SdfaModel& model, const std::filesystem::path& dir, int epoch);
SdfaModel load_checkpoint(const std::filesystem::path& dir);

}  // namespace sdfa
