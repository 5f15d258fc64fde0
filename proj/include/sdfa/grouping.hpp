#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "sdfa/dataset.hpp"

namespace sdfa {

/// A partition of the attribute dimensions into m groups. Group indices are
/// 1-based (0 is reserved for "no group masked" elsewhere); centroid row g-1
/// belongs to group g.
struct AttributeGroups {
  std::vector<int> assignment;  // d_a entries in 1..m
  Matrix centroids;             // m x d_w
  double objective = 0.0;
  int m = 0;

  std::vector<int> members(int group) const;
};

enum class ClusterTermination { kConverged, kMaxIterations };

struct ClusterResult {
  AttributeGroups groups;
  ClusterTermination termination = ClusterTermination::kConverged;
  int iterations = 0;
  std::vector<double> objective_trace;  // value after every centroid update
};

double clustering_objective(const EmbeddingTable& table, const AttributeGroups& groups);

/// Row g-1 is the mean of the rows assigned to group g. Throws EmptyGroupError.
Matrix update_centroids(const EmbeddingTable& table, const std::vector<int>& assignment, int m);

/// Lloyd iterations with greedy farthest-point seeding. Nearest-centroid ties
/// go to the lowest group index; an empty group is re-seeded with the point
/// farthest from its centroid (taken from a group of size >= 2). When an
/// assignment pass changes nothing, the single point transfer that lowers the
/// objective most (if any) is applied before iterating again.
ClusterResult cluster_attribute_dimensions_traced(const EmbeddingTable& table, int m, std::uint64_t seed,
                                                  int max_iters = 200);

AttributeGroups cluster_attribute_dimensions(const EmbeddingTable& table, int m, std::uint64_t seed,
                                             int max_iters = 200);

/// Embeds attribute dimension j as its value profile across classes.
EmbeddingTable profile_embeddings(const DatasetBundle& bundle);

/// Nearest-centroid assignment pass (lowest index wins ties).
std::vector<int> assign_to_nearest(const EmbeddingTable& table, const Matrix& centroids);

/// True when the two partitions agree up to a relabeling of groups.
bool same_partition(const std::vector<int>& a, const std::vector<int>& b);

// groups.csv (attribute_name, group_index) + groups.json {"m", "objective"}.
void save_groups(const AttributeGroups& groups, const EmbeddingTable& table, const std::filesystem::path& csv_path,
                 const std::filesystem::path& json_path);
AttributeGroups load_groups(const std::filesystem::path& csv_path, const EmbeddingTable& table);

}  // namespace sdfa
