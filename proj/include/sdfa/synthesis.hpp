#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "sdfa/classifier.hpp"
#include "sdfa/gan.hpp"

namespace sdfa {

struct SynthesisPlan {
  int n_complete_per_class = 100;
  double ratio_per_group = 0.25;  // masked rows per group per class = round(ratio * n_complete)
  std::vector<ClassId> target_classes;
  std::uint64_t seed = 0;
  bool drop_noop_masks = false;  // skip variants whose masked group is already all-zero for the class

  int masked_per_group() const;
};

void validate(const SynthesisPlan& plan);

struct SynthesizedSet {
  Matrix features;
  std::vector<ClassId> labels;
  std::vector<int> provenance;  // 0 = complete attribute, i = group i masked
};

/// Per target class (ascending): n_complete draws from G(a, z), then
/// round(ratio * n_complete) draws from every masked variant a^i in group
/// order. Rows keep the source class label. Noise is keyed per (class, variant).
SynthesizedSet synthesize_features(const SdfaModel& model, const Matrix& attributes, const SynthesisPlan& plan);

void save_synthesized(const SynthesizedSet& set, const std::filesystem::path& path);
SynthesizedSet load_synthesized(const std::filesystem::path& path);

/// Softmax classifier over seen + unseen classes trained on the real
/// train_seen rows together with the synthetic rows.
SoftmaxClassifier train_final_classifier(const DatasetBundle& bundle, const SynthesizedSet& synthetic,
                                         const ClassifierTraining& cfg);

struct GzslMetrics {
  std::map<ClassId, double> per_class_acc;
  double U = 0.0;
  double S = 0.0;
  double H = 0.0;
};

/// Fraction of each class's instances predicted correctly; classes absent
/// from `truth` are left out.
std::map<ClassId, double> per_class_accuracy(const std::vector<ClassId>& pred, const std::vector<ClassId>& truth,
                                             const std::vector<ClassId>& classes);

/// 2SU / (S + U); 0 when both are 0.
double harmonic_mean(double s, double u);

GzslMetrics gzsl_metrics(const std::vector<ClassId>& seen_pred, const std::vector<ClassId>& seen_truth,
                         const std::vector<ClassId>& unseen_pred, const std::vector<ClassId>& unseen_truth,
                         const DatasetBundle& bundle);

GzslMetrics evaluate_gzsl(const SoftmaxClassifier& classifier, const DatasetBundle& bundle);

std::string metrics_json(const GzslMetrics& m);
void write_metrics(const GzslMetrics& m, const std::filesystem::path& json_path, const std::filesystem::path& csv_path);

}  // namespace sdfa
