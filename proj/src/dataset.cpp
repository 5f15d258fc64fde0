#include "sdfa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "json.hpp"

#include "sdfa/errors.hpp"
#include "sdfa/io.hpp"
#include "sdfa/rng.hpp"

namespace sdfa {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrainSeen: return "train_seen";
    case Split::kTestSeen: return "test_seen";
    case Split::kTestUnseen: return "test_unseen";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train_seen") return Split::kTrainSeen;
  if (s == "test_seen") return Split::kTestSeen;
  if (s == "test_unseen") return Split::kTestUnseen;
  throw ValidationError("unknown split bucket '" + s + "'");
}

std::vector<Eigen::Index> DatasetBundle::indices(Split s) const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

Matrix DatasetBundle::rows(const std::vector<Eigen::Index>& idx) const {
  Matrix out(static_cast<Eigen::Index>(idx.size()), features.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = features.row(idx[r]);
  return out;
}

std::vector<ClassId> DatasetBundle::labels_at(const std::vector<Eigen::Index>& idx) const {
  std::vector<ClassId> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(labels[static_cast<std::size_t>(i)]);
  return out;
}

bool DatasetBundle::is_seen(ClassId c) const {
  return std::binary_search(seen_classes.begin(), seen_classes.end(), c);
}

bool DatasetBundle::operator==(const DatasetBundle& o) const {
  return features.rows() == o.features.rows() && features.cols() == o.features.cols() && features == o.features &&
         labels == o.labels && attributes.rows() == o.attributes.rows() && attributes.cols() == o.attributes.cols() &&
         attributes == o.attributes && attribute_names == o.attribute_names && seen_classes == o.seen_classes &&
         unseen_classes == o.unseen_classes && split == o.split && normalization == o.normalization &&
         embeddings == o.embeddings;
}

void validate(const EmbeddingTable& table) {
  if (static_cast<Eigen::Index>(table.names.size()) != table.vectors.rows())
    throw ShapeError("embedding names/rows mismatch");
  if (table.vectors.cols() < 2) throw ValidationError("embedding dimension d_w must be >= 2");
  if (!table.vectors.allFinite()) throw ValidationError("non-finite embedding entry");
}

void validate(const DatasetBundle& b) {
  const auto n = static_cast<std::size_t>(b.features.rows());
  if (b.labels.size() != n) throw ShapeError("label count does not match feature rows");
  if (b.split.size() != n) throw ShapeError("split count does not match feature rows");
  if (b.attributes.cols() < 2) throw ValidationError("attribute dimension d_a must be >= 2");
  if (static_cast<Eigen::Index>(b.attribute_names.size()) != b.attributes.cols())
    throw ShapeError("attribute name count does not match attribute columns");
  if (b.seen_classes.empty()) throw ValidationError("no seen classes");
  if (b.unseen_classes.empty()) throw ValidationError("no unseen classes");
  if (!std::is_sorted(b.seen_classes.begin(), b.seen_classes.end()) ||
      !std::is_sorted(b.unseen_classes.begin(), b.unseen_classes.end()))
    throw ValidationError("class sets must be sorted");
  if (std::adjacent_find(b.seen_classes.begin(), b.seen_classes.end()) != b.seen_classes.end() ||
      std::adjacent_find(b.unseen_classes.begin(), b.unseen_classes.end()) != b.unseen_classes.end())
    throw ValidationError("duplicate class id in class set");
  std::vector<ClassId> both;
  std::set_intersection(b.seen_classes.begin(), b.seen_classes.end(), b.unseen_classes.begin(),
                        b.unseen_classes.end(), std::back_inserter(both));
  if (!both.empty()) throw ValidationError("overlapping class sets (class " + std::to_string(both.front()) + ")");
  const auto n_classes = static_cast<ClassId>(b.attributes.rows());
  auto has_row = [n_classes](ClassId c) { return c >= 0 && c < n_classes; };
  for (ClassId c : b.seen_classes)
    if (!has_row(c)) throw ValidationError("class without attribute row (class " + std::to_string(c) + ")");
  for (ClassId c : b.unseen_classes)
    if (!has_row(c)) throw ValidationError("class without attribute row (class " + std::to_string(c) + ")");
  for (std::size_t i = 0; i < n; ++i) {
    const ClassId c = b.labels[i];
    if (!has_row(c)) throw ValidationError("class without attribute row (class " + std::to_string(c) + ")");
    const bool seen = b.is_seen(c);
    const bool unseen = std::binary_search(b.unseen_classes.begin(), b.unseen_classes.end(), c);
    if (!seen && !unseen)
      throw ValidationError("label in neither class set (instance " + std::to_string(i) + ")");
    if (b.split[i] == Split::kTestUnseen ? !unseen : !seen)
      throw ValidationError("split bucket inconsistent with class set (instance " + std::to_string(i) + ")");
  }
  if (!b.features.allFinite()) throw ValidationError("non-finite feature");
  if (!b.attributes.allFinite()) throw ValidationError("non-finite attribute");
  if (b.attributes.size() > 0 && (b.attributes.minCoeff() < 0.0 || b.attributes.maxCoeff() > 1.0))
    throw ValidationError("attribute outside [0,1] (use minmax normalization)");
  if (b.embeddings) {
    validate(*b.embeddings);
    if (b.embeddings->rows() != b.attributes.cols())
      throw ShapeError("embedding table needs one row per attribute dimension");
  }
}

void normalize_attributes(DatasetBundle& b) {
  const Eigen::Index d = b.attributes.cols();
  b.normalization.method = "minmax";
  b.normalization.min.assign(static_cast<std::size_t>(d), 0.0);
  b.normalization.max.assign(static_cast<std::size_t>(d), 0.0);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double lo = b.attributes.col(j).minCoeff();
    const double hi = b.attributes.col(j).maxCoeff();
    b.normalization.min[static_cast<std::size_t>(j)] = lo;
    b.normalization.max[static_cast<std::size_t>(j)] = hi;
    if (hi > lo)
      b.attributes.col(j) = (b.attributes.col(j).array() - lo) / (hi - lo);
    else
      b.attributes.col(j).setZero();
  }
}

EmbeddingTable load_embeddings(const fs::path& path) {
  const auto table = io::read_csv(path);
  EmbeddingTable out;
  out.vectors = io::to_matrix(table, 1, path.string());
  for (const auto& r : table.rows) out.names.push_back(r[0]);
  validate(out);
  return out;
}

void save_embeddings(const EmbeddingTable& table, const fs::path& path) {
  validate(table);
  io::CsvTable csv;
  csv.header.push_back("name");
  for (Eigen::Index j = 0; j < table.dims(); ++j) csv.header.push_back("e" + std::to_string(j));
  io::append_matrix_rows(csv, table.vectors);
  for (std::size_t r = 0; r < csv.rows.size(); ++r) csv.rows[r].insert(csv.rows[r].begin(), table.names[r]);
  io::write_csv(path, csv);
}

DatasetBundle load_dataset(const fs::path& manifest_path) {
  json manifest;
  try {
    manifest = json::parse(io::read_text(manifest_path));
  } catch (const json::exception& e) {
    throw LoadError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  const fs::path base = manifest_path.parent_path();
  auto file_of = [&](const char* key) {
    if (!manifest.contains(key) || !manifest[key].is_string())
      throw LoadError("manifest " + manifest_path.string() + " lacks key '" + key + "'");
    return base / manifest[key].get<std::string>();
  };

  DatasetBundle b;
  try {
    const auto features_path = file_of("features");
    b.features = io::to_matrix(io::read_csv(features_path), 0, features_path.string());

    const auto labels_path = file_of("labels");
    const auto labels = io::read_csv(labels_path);
    if (labels.header.size() != 1) throw ShapeError("labels file must have one column: " + labels_path.string());
    for (const auto& r : labels.rows)
      b.labels.push_back(static_cast<ClassId>(io::parse_int(r[0], labels_path.string())));

    const auto attr_path = file_of("attributes");
    const auto attrs = io::read_csv(attr_path);
    b.attribute_names = attrs.header;
    b.attributes = io::to_matrix(attrs, 0, attr_path.string());

    if (b.labels.size() != static_cast<std::size_t>(b.features.rows()))
      throw ShapeError("labels (" + std::to_string(b.labels.size()) + " rows) vs features (" +
                       std::to_string(b.features.rows()) + " rows)");

    const auto split_path = file_of("splits");
    const auto splits = io::read_csv(split_path);
    if (splits.header.size() != 2) throw ShapeError("splits file must have two columns: " + split_path.string());
    if (splits.rows.size() != b.labels.size())
      throw ShapeError("splits (" + std::to_string(splits.rows.size()) + " rows) vs labels (" +
                       std::to_string(b.labels.size()) + " rows)");
    b.split.assign(b.labels.size(), Split::kTrainSeen);
    std::vector<bool> assigned(b.labels.size(), false);
    for (const auto& r : splits.rows) {
      const auto idx = io::parse_int(r[0], split_path.string());
      if (idx < 0 || static_cast<std::size_t>(idx) >= b.labels.size())
        throw ValidationError("split instance index out of range: " + r[0]);
      if (assigned[static_cast<std::size_t>(idx)])
        throw ValidationError("instance appears in more than one split bucket: " + r[0]);
      assigned[static_cast<std::size_t>(idx)] = true;
      b.split[static_cast<std::size_t>(idx)] = split_from_string(r[1]);
    }

    b.seen_classes = manifest.at("seen_classes").get<std::vector<ClassId>>();
    b.unseen_classes = manifest.at("unseen_classes").get<std::vector<ClassId>>();
    std::sort(b.seen_classes.begin(), b.seen_classes.end());
    std::sort(b.unseen_classes.begin(), b.unseen_classes.end());

    if (manifest.contains("embeddings") && !manifest["embeddings"].is_null()) {
      b.embeddings = load_embeddings(file_of("embeddings"));
    }

    const json norm = manifest.value("normalization", json::object());
    const std::string method = norm.value("method", "none");
    if (method == "minmax") {
      if (norm.value("applied", false)) {
        b.normalization.method = "minmax";
        b.normalization.min = norm.at("min").get<std::vector<double>>();
        b.normalization.max = norm.at("max").get<std::vector<double>>();
      } else {
        normalize_attributes(b);
      }
    } else if (method != "none") {
      throw ValidationError("unknown normalization method '" + method + "'");
    }
  } catch (const json::exception& e) {
    throw LoadError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  validate(b);
  return b;
}

fs::path save_dataset(const DatasetBundle& b, const fs::path& dir) {
  validate(b);
  io::ensure_directory(dir);

  io::CsvTable features;
  for (Eigen::Index j = 0; j < b.d_x(); ++j) features.header.push_back("f" + std::to_string(j));
  io::append_matrix_rows(features, b.features);
  io::write_csv(dir / "features.csv", features);

  io::CsvTable labels{{"label"}, {}};
  for (ClassId c : b.labels) labels.rows.push_back({std::to_string(c)});
  io::write_csv(dir / "labels.csv", labels);

  io::CsvTable attrs;
  attrs.header = b.attribute_names;
  io::append_matrix_rows(attrs, b.attributes);
  io::write_csv(dir / "attributes.csv", attrs);

  io::CsvTable splits{{"instance_index", "bucket"}, {}};
  for (std::size_t i = 0; i < b.split.size(); ++i) splits.rows.push_back({std::to_string(i), to_string(b.split[i])});
  io::write_csv(dir / "splits.csv", splits);

  json manifest;
  manifest["format"] = "sdfa-dataset";
  manifest["version"] = 1;
  manifest["features"] = "features.csv";
  manifest["labels"] = "labels.csv";
  manifest["attributes"] = "attributes.csv";
  manifest["splits"] = "splits.csv";
  manifest["seen_classes"] = b.seen_classes;
  manifest["unseen_classes"] = b.unseen_classes;
  if (b.embeddings) {
    save_embeddings(*b.embeddings, dir / "embeddings.csv");
    manifest["embeddings"] = "embeddings.csv";
  }
  json norm;
  norm["method"] = b.normalization.method;
  if (b.normalization.method == "minmax") {
    norm["applied"] = true;
    norm["min"] = b.normalization.min;
    norm["max"] = b.normalization.max;
  }
  manifest["normalization"] = norm;
  const fs::path manifest_path = dir / "manifest.json";
  io::write_text(manifest_path, manifest.dump(2) + "\n");
  return manifest_path;
}

void validate(const SyntheticSpec& s) {
  if (s.d_a < 2) throw ValidationError("synthetic d_a must be >= 2");
  if (s.d_x < 1) throw ValidationError("synthetic d_x must be >= 1");
  if (s.m_true < 1 || s.d_a % s.m_true != 0) throw ValidationError("m_true must divide d_a");
  if (s.n_seen_classes < 1 || s.n_unseen_classes < 1) throw ValidationError("need seen and unseen classes");
  if (s.instances_per_class < 1) throw ValidationError("instances_per_class must be >= 1");
  if (!(s.p_miss >= 0.0 && s.p_miss <= 1.0)) throw ValidationError("p_miss must lie in [0,1]");
  if (!(s.noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be >= 0");
  if (s.d_w < 2) throw ValidationError("d_w must be >= 2");
  if (!(s.embedding_jitter >= 0.0)) throw ValidationError("embedding_jitter must be >= 0");
}

SyntheticBenchmark generate_synthetic_benchmark(const SyntheticSpec& spec) {
  validate(spec);
  const int n_classes = spec.n_seen_classes + spec.n_unseen_classes;
  const int group_size = spec.d_a / spec.m_true;

  SyntheticBenchmark out;
  DatasetBundle& b = out.bundle;

  auto attr_rng = rng::stream(spec.seed, "synthetic/attributes");
  b.attributes = rng::uniform(attr_rng, n_classes, spec.d_a);
  for (int j = 0; j < spec.d_a; ++j) {
    char name[32];
    std::snprintf(name, sizeof name, "attr_%02d", j);
    b.attribute_names.emplace_back(name);
  }

  auto map_rng = rng::stream(spec.seed, "synthetic/map");
  const Matrix map = rng::normal(map_rng, spec.d_x, spec.d_a, std::sqrt(3.0 / spec.d_a));

  // Ground-truth groups: a seeded permutation cut into equal blocks.
  auto group_rng = rng::stream(spec.seed, "synthetic/groups");
  std::vector<int> perm(static_cast<std::size_t>(spec.d_a));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), group_rng);
  out.ground_truth_groups.assign(static_cast<std::size_t>(spec.d_a), 0);
  for (int k = 0; k < spec.d_a; ++k) out.ground_truth_groups[static_cast<std::size_t>(perm[k])] = k / group_size + 1;

  auto emb_rng = rng::stream(spec.seed, "synthetic/embeddings");
  const Matrix centres = rng::normal(emb_rng, spec.m_true, spec.d_w);
  out.embeddings.vectors.resize(spec.d_a, spec.d_w);
  for (int j = 0; j < spec.d_a; ++j)
    out.embeddings.vectors.row(j) =
        centres.row(out.ground_truth_groups[static_cast<std::size_t>(j)] - 1) +
        rng::normal(emb_rng, 1, spec.d_w, spec.embedding_jitter);
  out.embeddings.names = b.attribute_names;

  const auto n = static_cast<Eigen::Index>(n_classes) * spec.instances_per_class;
  b.features.resize(n, spec.d_x);
  b.labels.reserve(static_cast<std::size_t>(n));
  out.instance_masked_group.reserve(static_cast<std::size_t>(n));
  auto inst_rng = rng::stream(spec.seed, "synthetic/instances");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> pick_group(1, spec.m_true);
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::Index row = 0;
  for (int c = 0; c < n_classes; ++c) {
    for (int k = 0; k < spec.instances_per_class; ++k, ++row) {
      int dropped = 0;
      if (coin(inst_rng) < spec.p_miss) dropped = pick_group(inst_rng);
      Vector a = b.attributes.row(c).transpose();
      if (dropped)
        for (int j = 0; j < spec.d_a; ++j)
          if (out.ground_truth_groups[static_cast<std::size_t>(j)] == dropped) a(j) = 0.0;
      Vector x = (map * a).cwiseMax(0.0);
      for (int j = 0; j < spec.d_x; ++j) x(j) += spec.noise_sigma * noise(inst_rng);
      b.features.row(row) = x.transpose();
      b.labels.push_back(c);
      out.instance_masked_group.push_back(dropped);
    }
  }

  for (int c = 0; c < spec.n_seen_classes; ++c) b.seen_classes.push_back(c);
  for (int c = spec.n_seen_classes; c < n_classes; ++c) b.unseen_classes.push_back(c);

  b.split.assign(static_cast<std::size_t>(n), Split::kTestUnseen);
  auto split_rng = rng::stream(spec.seed, "synthetic/splits");
  const int n_train = static_cast<int>(std::lround(0.8 * spec.instances_per_class));
  for (int c = 0; c < spec.n_seen_classes; ++c) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(spec.instances_per_class));
    std::iota(idx.begin(), idx.end(), static_cast<std::size_t>(c) * static_cast<std::size_t>(spec.instances_per_class));
    std::shuffle(idx.begin(), idx.end(), split_rng);
    for (std::size_t k = 0; k < idx.size(); ++k)
      b.split[idx[k]] = static_cast<int>(k) < n_train ? Split::kTrainSeen : Split::kTestSeen;
  }

  b.embeddings = out.embeddings;
  validate(b);
  return out;
}

}  // namespace sdfa
