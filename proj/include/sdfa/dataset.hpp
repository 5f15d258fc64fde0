#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sdfa {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ClassId = int;

enum class Split { kTrainSeen, kTestSeen, kTestUnseen };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

/// Word vectors, one row per attribute dimension.
struct EmbeddingTable {
  Matrix vectors;  // d_a x d_w
  std::vector<std::string> names;

  Eigen::Index rows() const { return vectors.rows(); }
  Eigen::Index dims() const { return vectors.cols(); }
  bool operator==(const EmbeddingTable& o) const { return names == o.names && vectors == o.vectors; }
};

void validate(const EmbeddingTable& table);

/// Per-dimension min-max transform applied to raw class attributes. `min` and
/// `max` hold the raw ranges; stored attributes are always post-transform.
struct AttributeNormalization {
  std::string method = "none";  // "none" | "minmax"
  std::vector<double> min;
  std::vector<double> max;

  bool operator==(const AttributeNormalization&) const = default;
};

struct DatasetBundle {
  Matrix features;                   // n x d_x
  std::vector<ClassId> labels;       // n
  Matrix attributes;                 // n_classes x d_a, row = class id
  std::vector<std::string> attribute_names;
  std::vector<ClassId> seen_classes;    // ascending
  std::vector<ClassId> unseen_classes;  // ascending
  std::vector<Split> split;          // n
  AttributeNormalization normalization;
  std::optional<EmbeddingTable> embeddings;

  Eigen::Index n_instances() const { return features.rows(); }
  Eigen::Index d_x() const { return features.cols(); }
  Eigen::Index d_a() const { return attributes.cols(); }
  Eigen::Index n_classes() const { return attributes.rows(); }

  std::vector<Eigen::Index> indices(Split s) const;
  Matrix rows(const std::vector<Eigen::Index>& idx) const;
  std::vector<ClassId> labels_at(const std::vector<Eigen::Index>& idx) const;
  bool is_seen(ClassId c) const;

  bool operator==(const DatasetBundle& o) const;
};

/// Throws ValidationError naming the first violated rule.
void validate(const DatasetBundle& bundle);

/// Min-max normalizes attribute columns in place and records the transform.
/// Constant columns map to 0.
void normalize_attributes(DatasetBundle& bundle);

DatasetBundle load_dataset(const std::filesystem::path& manifest_path);
std::filesystem::path save_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir);

EmbeddingTable load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

struct SyntheticSpec {
  int d_a = 20;
  int d_x = 32;
  int m_true = 4;
  int n_seen_classes = 12;
  int n_unseen_classes = 6;
  int instances_per_class = 100;
  double p_miss = 0.5;
  double noise_sigma = 0.05;
  std::uint64_t seed = 7;
  int d_w = 16;
  double embedding_jitter = 0.05;
};

void validate(const SyntheticSpec& spec);

struct SyntheticBenchmark {
  DatasetBundle bundle;  // bundle.embeddings holds the same table as `embeddings`
  EmbeddingTable embeddings;
  std::vector<int> ground_truth_groups;  // per attribute dimension, 1..m_true
  std::vector<int> instance_masked_group;  // per instance, 0 = complete
};

SyntheticBenchmark generate_synthetic_benchmark(const SyntheticSpec& spec);

}  // namespace sdfa
