#include "sdfa/grouping.hpp"

#include <limits>
#include <map>

#include "json.hpp"

#include "sdfa/errors.hpp"
#include "sdfa/io.hpp"
#include "sdfa/rng.hpp"

namespace sdfa {

std::vector<int> AttributeGroups::members(int group) const {
  std::vector<int> out;
  for (std::size_t j = 0; j < assignment.size(); ++j)
    if (assignment[j] == group) out.push_back(static_cast<int>(j));
  return out;
}

double clustering_objective(const EmbeddingTable& table, const AttributeGroups& groups) {
  if (static_cast<Eigen::Index>(groups.assignment.size()) != table.rows())
    throw ShapeError("assignment length does not match embedding rows");
  if (groups.centroids.rows() != groups.m || groups.centroids.cols() != table.dims())
    throw ShapeError("centroid matrix shape does not match m x d_w");
  double e = 0.0;
  for (Eigen::Index j = 0; j < table.rows(); ++j) {
    const int g = groups.assignment[static_cast<std::size_t>(j)];
    if (g < 1 || g > groups.m) throw ShapeError("group index out of range");
    e += (table.vectors.row(j) - groups.centroids.row(g - 1)).squaredNorm();
  }
  return e;
}

Matrix update_centroids(const EmbeddingTable& table, const std::vector<int>& assignment, int m) {
  if (static_cast<Eigen::Index>(assignment.size()) != table.rows())
    throw ShapeError("assignment length does not match embedding rows");
  Matrix sums = Matrix::Zero(m, table.dims());
  std::vector<int> counts(static_cast<std::size_t>(m), 0);
  for (std::size_t j = 0; j < assignment.size(); ++j) {
    const int g = assignment[j];
    if (g < 1 || g > m) throw ShapeError("group index out of range");
    sums.row(g - 1) += table.vectors.row(static_cast<Eigen::Index>(j));
    ++counts[static_cast<std::size_t>(g - 1)];
  }
  for (int g = 0; g < m; ++g) {
    if (counts[static_cast<std::size_t>(g)] == 0) throw EmptyGroupError(g + 1);
    sums.row(g) /= static_cast<double>(counts[static_cast<std::size_t>(g)]);
  }
  return sums;
}

std::vector<int> assign_to_nearest(const EmbeddingTable& table, const Matrix& centroids) {
  std::vector<int> out(static_cast<std::size_t>(table.rows()));
  for (Eigen::Index j = 0; j < table.rows(); ++j) {
    double best = std::numeric_limits<double>::infinity();
    int best_g = 1;
    for (Eigen::Index g = 0; g < centroids.rows(); ++g) {
      const double d = (table.vectors.row(j) - centroids.row(g)).squaredNorm();
      if (d < best) {
        best = d;
        best_g = static_cast<int>(g) + 1;
      }
    }
    out[static_cast<std::size_t>(j)] = best_g;
  }
  return out;
}

namespace {

Matrix farthest_point_seeds(const EmbeddingTable& table, int m, std::uint64_t seed) {
  auto eng = rng::stream(seed, "grouping/init");
  std::uniform_int_distribution<Eigen::Index> pick(0, table.rows() - 1);
  Matrix centres(m, table.dims());
  centres.row(0) = table.vectors.row(pick(eng));
  Vector min_dist(table.rows());
  for (Eigen::Index j = 0; j < table.rows(); ++j) min_dist(j) = (table.vectors.row(j) - centres.row(0)).squaredNorm();
  for (int g = 1; g < m; ++g) {
    Eigen::Index far = 0;
    for (Eigen::Index j = 1; j < table.rows(); ++j)
      if (min_dist(j) > min_dist(far)) far = j;
    centres.row(g) = table.vectors.row(far);
    for (Eigen::Index j = 0; j < table.rows(); ++j)
      min_dist(j) = std::min(min_dist(j), (table.vectors.row(j) - centres.row(g)).squaredNorm());
  }
  return centres;
}

// Moves the farthest-from-centroid point of a group with >= 2 members into
// every empty group, recomputing centroids as it goes.
Matrix repair_empty_groups(const EmbeddingTable& table, std::vector<int>& assignment, int m) {
  for (;;) {
    std::vector<int> counts(static_cast<std::size_t>(m), 0);
    for (int g : assignment) ++counts[static_cast<std::size_t>(g - 1)];
    int empty = 0;
    for (int g = 1; g <= m && !empty; ++g)
      if (counts[static_cast<std::size_t>(g - 1)] == 0) empty = g;
    if (!empty) return update_centroids(table, assignment, m);

    Matrix sums = Matrix::Zero(m, table.dims());
    for (std::size_t j = 0; j < assignment.size(); ++j)
      sums.row(assignment[j] - 1) += table.vectors.row(static_cast<Eigen::Index>(j));
    Eigen::Index far = -1;
    double far_d = -1.0;
    for (std::size_t j = 0; j < assignment.size(); ++j) {
      const int g = assignment[j];
      if (counts[static_cast<std::size_t>(g - 1)] < 2) continue;
      const double d = (table.vectors.row(static_cast<Eigen::Index>(j)) -
                        sums.row(g - 1) / static_cast<double>(counts[static_cast<std::size_t>(g - 1)]))
                           .squaredNorm();
      if (d > far_d) {
        far_d = d;
        far = static_cast<Eigen::Index>(j);
      }
    }
    assignment[static_cast<std::size_t>(far)] = empty;
  }
}

// Best single-point transfer (Hartigan criterion): moving j from A to B
// changes the objective by n_B/(n_B+1)|x-c_B|^2 - n_A/(n_A-1)|x-c_A|^2.
// Returns false when no transfer strictly lowers the objective.
bool improving_transfer(const EmbeddingTable& table, std::vector<int>& assignment, const Matrix& centroids, int m) {
  std::vector<double> counts(static_cast<std::size_t>(m), 0.0);
  for (int g : assignment) counts[static_cast<std::size_t>(g - 1)] += 1.0;
  double best_gain = 1e-12;
  std::size_t best_j = 0;
  int best_g = 0;
  for (std::size_t j = 0; j < assignment.size(); ++j) {
    const int a = assignment[j];
    const double na = counts[static_cast<std::size_t>(a - 1)];
    if (na < 2.0) continue;
    const auto x = table.vectors.row(static_cast<Eigen::Index>(j));
    const double leave = na / (na - 1.0) * (x - centroids.row(a - 1)).squaredNorm();
    for (int b = 1; b <= m; ++b) {
      if (b == a) continue;
      const double nb = counts[static_cast<std::size_t>(b - 1)];
      const double gain = leave - nb / (nb + 1.0) * (x - centroids.row(b - 1)).squaredNorm();
      if (gain > best_gain) {
        best_gain = gain;
        best_j = j;
        best_g = b;
      }
    }
  }
  if (best_g == 0) return false;
  assignment[best_j] = best_g;
  return true;
}

}  // namespace

ClusterResult cluster_attribute_dimensions_traced(const EmbeddingTable& table, int m, std::uint64_t seed,
                                                  int max_iters) {
  validate(table);
  if (table.rows() < 2) throw ArgumentError("need d_a >= 2 attribute dimensions");
  if (m < 2 || m > table.rows())
    throw ArgumentError("group count m=" + std::to_string(m) + " outside [2, d_a=" + std::to_string(table.rows()) +
                        "]");
  if (max_iters < 1) throw ArgumentError("max_iters must be >= 1");

  ClusterResult result;
  Matrix centroids = farthest_point_seeds(table, m, seed);
  std::vector<int> assignment = assign_to_nearest(table, centroids);
  result.termination = ClusterTermination::kMaxIterations;
  for (int it = 1; it <= max_iters; ++it) {
    centroids = repair_empty_groups(table, assignment, m);
    result.iterations = it;
    result.objective_trace.push_back(clustering_objective(table, AttributeGroups{assignment, centroids, 0.0, m}));
    auto next = assign_to_nearest(table, centroids);
    if (next == assignment && !improving_transfer(table, next, centroids, m)) {
      result.termination = ClusterTermination::kConverged;
      break;
    }
    assignment = std::move(next);
  }
  if (result.termination == ClusterTermination::kMaxIterations) {
    // Assignment may have moved after the final update; refresh to keep the
    // centroid invariant.
    centroids = repair_empty_groups(table, assignment, m);
  }
  result.groups = AttributeGroups{assignment, centroids, 0.0, m};
  result.groups.objective = clustering_objective(table, result.groups);
  return result;
}

AttributeGroups cluster_attribute_dimensions(const EmbeddingTable& table, int m, std::uint64_t seed, int max_iters) {
  return cluster_attribute_dimensions_traced(table, m, seed, max_iters).groups;
}

EmbeddingTable profile_embeddings(const DatasetBundle& bundle) {
  EmbeddingTable t;
  t.vectors = bundle.attributes.transpose();
  t.names = bundle.attribute_names;
  return t;
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> fwd, back;
  for (std::size_t j = 0; j < a.size(); ++j) {
    auto [f, fi] = fwd.emplace(a[j], b[j]);
    auto [r, ri] = back.emplace(b[j], a[j]);
    if (f->second != b[j] || r->second != a[j]) return false;
  }
  return true;
}

void save_groups(const AttributeGroups& groups, const EmbeddingTable& table, const std::filesystem::path& csv_path,
                 const std::filesystem::path& json_path) {
  io::CsvTable csv{{"attribute_name", "group_index"}, {}};
  for (std::size_t j = 0; j < groups.assignment.size(); ++j)
    csv.rows.push_back({table.names[j], std::to_string(groups.assignment[j])});
  io::write_csv(csv_path, csv);
  nlohmann::json side;
  side["m"] = groups.m;
  side["objective"] = groups.objective;
  io::write_text(json_path, side.dump(2) + "\n");
}

AttributeGroups load_groups(const std::filesystem::path& csv_path, const EmbeddingTable& table) {
  const auto csv = io::read_csv(csv_path);
  if (static_cast<Eigen::Index>(csv.rows.size()) != table.rows())
    throw ShapeError("group file rows do not match attribute dimensions: " + csv_path.string());
  AttributeGroups g;
  for (const auto& r : csv.rows) {
    g.assignment.push_back(static_cast<int>(io::parse_int(r[1], csv_path.string())));
    g.m = std::max(g.m, g.assignment.back());
  }
  g.centroids = update_centroids(table, g.assignment, g.m);
  g.objective = clustering_objective(table, g);
  return g;
}

}  // namespace sdfa
