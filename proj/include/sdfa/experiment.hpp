#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "sdfa/gan.hpp"
#include "sdfa/synthesis.hpp"

namespace sdfa {

/// Every knob of one experiment. JSON keys match the field names.
struct ExperimentConfig {
  std::filesystem::path dataset;  // manifest path
  std::filesystem::path output_dir;
  int m = 4;
  LossWeights weights;
  int epochs = 150;
  int batch_size = 64;
  int hidden = 128;
  int d_z = 0;
  double lr_generator = 1e-3;
  double lr_critic = 1e-3;
  double lr_self_sup = 1e-3;
  double generator_weight_decay = 1e-4;
  int n_complete_per_class = 100;
  double ratio = 0.25;
  std::uint64_t master_seed = 0;
  bool self_sup_includes_complete = true;
  bool detach_self_sup = false;
  bool drop_noop_masks = false;
  bool sampled_masks = false;
  bool synthesize_seen = false;
  int checkpoint_every = 0;
  int cluster_max_iters = 200;
  int classifier_epochs = 30;
  double classifier_lr = 1e-2;
  int final_classifier_epochs = 30;
  double final_classifier_lr = 1e-2;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);
void validate(const ExperimentConfig& cfg);

/// Seeds derived from master_seed for each stage.
struct ResolvedSeeds {
  std::uint64_t cluster = 0;
  std::uint64_t gan = 0;
  std::uint64_t seen_classifier = 0;
  std::uint64_t synthesis = 0;
  std::uint64_t final_classifier = 0;
};
ResolvedSeeds resolve_seeds(std::uint64_t master_seed);

struct RunResult {
  GzslMetrics metrics;
  TrainingLog log;
  AttributeGroups groups;
  double seen_classifier_accuracy = 0.0;
  double self_sup_accuracy = 0.0;  // on unseen-class generated variants
};

/// Writes the dataset, embeddings and ground-truth groups; returns the manifest path.
std::filesystem::path cmd_make_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

/// Clusters embeddings (or attribute profiles when the manifest has none)
/// and writes groups.csv + groups.json into output_dir.
AttributeGroups cmd_cluster(const ExperimentConfig& cfg);

/// cluster -> pretrain -> train -> synthesize -> final classifier -> evaluate.
/// Failures are rethrown with the stage name prefixed.
RunResult cmd_run(const ExperimentConfig& cfg);

struct LegSummary {
  std::string leg;
  std::string seed;  // integer, or "mean"
  double U = 0.0;
  double S = 0.0;
  double H = 0.0;
};

/// Three legs at shared seeds: baseline (no diversity, no self-supervision,
/// complete-attribute synthesis only), +div, +div+self. Writes ablation.csv.
std::vector<LegSummary> cmd_ablate(const ExperimentConfig& cfg, int n_seeds);

/// One run per (value, seed) for param "m" or "ratio". Writes sweep.csv.
std::vector<LegSummary> cmd_sweep(const ExperimentConfig& cfg, const std::string& param,
                                  const std::vector<double>& values, int n_seeds);

/// Report bundle under run_dir/report.
void cmd_report(const std::filesystem::path& run_dir);

}  // namespace sdfa
