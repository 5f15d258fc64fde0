#include "sdfa/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"

#include "sdfa/errors.hpp"
#include "sdfa/io.hpp"

namespace sdfa {

int SynthesisPlan::masked_per_group() const {
  return static_cast<int>(std::lround(ratio_per_group * n_complete_per_class));
}

void validate(const SynthesisPlan& plan) {
  if (plan.n_complete_per_class < 1) throw ArgumentError("n_complete_per_class must be >= 1");
  if (!(plan.ratio_per_group >= 0.0) || !(plan.ratio_per_group < 10.0))
    throw ArgumentError("synthesis ratio must lie in [0, 10)");
  if (plan.target_classes.empty()) throw ArgumentError("no target classes to synthesize");
}

SynthesizedSet synthesize_features(const SdfaModel& model, const Matrix& attributes, const SynthesisPlan& plan) {
  if (!model.trained) throw StateError("model has not been trained or restored from a checkpoint");
  validate(plan);
  std::vector<ClassId> classes = plan.target_classes;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  for (ClassId c : classes)
    if (c < 0 || c >= attributes.rows()) throw ValidationError("class without attribute row (class " + std::to_string(c) + ")");

  const int n0 = plan.n_complete_per_class;
  const int nm = plan.masked_per_group();
  const Eigen::Index per_class = n0 + static_cast<Eigen::Index>(model.m()) * nm;
  SynthesizedSet out;
  out.features.resize(static_cast<Eigen::Index>(classes.size()) * per_class, model.d_x());
  Eigen::Index row = 0;
  for (ClassId c : classes) {
    const Vector a = attributes.row(c).transpose();
    for (int i = 0; i <= model.m(); ++i) {
      const int count = i == 0 ? n0 : nm;
      if (count == 0) continue;
      if (i > 0 && plan.drop_noop_masks && mask_is_noop(a, model.groups, i)) continue;
      const Vector masked = mask_group(a, model.groups, i);
      const Matrix cond = masked.transpose().replicate(count, 1);
      auto eng = rng::stream(plan.seed, "synthesis", {static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)});
      out.features.middleRows(row, count) = model.generate(cond, eng);
      row += count;
      out.labels.insert(out.labels.end(), static_cast<std::size_t>(count), c);
      out.provenance.insert(out.provenance.end(), static_cast<std::size_t>(count), i);
    }
  }
  out.features.conservativeResize(row, Eigen::NoChange);
  return out;
}

void save_synthesized(const SynthesizedSet& set, const std::filesystem::path& path) {
  io::CsvTable csv{{"label", "provenance"}, {}};
  for (Eigen::Index j = 0; j < set.features.cols(); ++j) csv.header.push_back("f" + std::to_string(j));
  io::append_matrix_rows(csv, set.features);
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    csv.rows[r].insert(csv.rows[r].begin(), std::to_string(set.provenance[r]));
    csv.rows[r].insert(csv.rows[r].begin(), std::to_string(set.labels[r]));
  }
  io::write_csv(path, csv);
}

SynthesizedSet load_synthesized(const std::filesystem::path& path) {
  const auto csv = io::read_csv(path);
  SynthesizedSet set;
  set.features = io::to_matrix(csv, 2, path.string());
  for (const auto& r : csv.rows) {
    set.labels.push_back(static_cast<ClassId>(io::parse_int(r[0], path.string())));
    set.provenance.push_back(static_cast<int>(io::parse_int(r[1], path.string())));
  }
  return set;
}

SoftmaxClassifier train_final_classifier(const DatasetBundle& bundle, const SynthesizedSet& synthetic,
                                         const ClassifierTraining& cfg) {
  for (ClassId c : bundle.unseen_classes)
    if (std::find(synthetic.labels.begin(), synthetic.labels.end(), c) == synthetic.labels.end())
      throw ValidationError("unseen class " + std::to_string(c) + " has zero synthetic rows");
  const auto idx = bundle.indices(Split::kTrainSeen);
  const Matrix real = bundle.rows(idx);
  Matrix x(real.rows() + synthetic.features.rows(), bundle.d_x());
  x << real, synthetic.features;
  std::vector<ClassId> y = bundle.labels_at(idx);
  y.insert(y.end(), synthetic.labels.begin(), synthetic.labels.end());

  std::vector<ClassId> classes = bundle.seen_classes;
  classes.insert(classes.end(), bundle.unseen_classes.begin(), bundle.unseen_classes.end());
  SoftmaxClassifier clf("final_classifier", static_cast<int>(bundle.d_x()), classes, cfg.seed);
  train_classifier(clf, x, y, cfg);
  return clf;
}

std::map<ClassId, double> per_class_accuracy(const std::vector<ClassId>& pred, const std::vector<ClassId>& truth,
                                             const std::vector<ClassId>& classes) {
  if (truth.empty()) throw ArgumentError("empty truth labels");
  if (pred.size() != truth.size()) throw ShapeError("prediction/truth length mismatch");
  const std::set<ClassId> allowed(classes.begin(), classes.end());
  std::map<ClassId, std::pair<long, long>> counts;  // correct, total
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!allowed.count(truth[i])) throw ArgumentError("truth label " + std::to_string(truth[i]) + " not in class set");
    auto& c = counts[truth[i]];
    c.first += pred[i] == truth[i];
    ++c.second;
  }
  std::map<ClassId, double> out;
  for (const auto& [c, n] : counts) out[c] = static_cast<double>(n.first) / static_cast<double>(n.second);
  return out;
}

double harmonic_mean(double s, double u) {
  if (!(s >= 0.0) || !(u >= 0.0)) throw ArgumentError("harmonic mean needs nonnegative accuracies");
  if (s + u == 0.0) return 0.0;
  return 2.0 * s * u / (s + u);
}

GzslMetrics gzsl_metrics(const std::vector<ClassId>& seen_pred, const std::vector<ClassId>& seen_truth,
                         const std::vector<ClassId>& unseen_pred, const std::vector<ClassId>& unseen_truth,
                         const DatasetBundle& bundle) {
  const auto seen = per_class_accuracy(seen_pred, seen_truth, bundle.seen_classes);
  const auto unseen = per_class_accuracy(unseen_pred, unseen_truth, bundle.unseen_classes);
  GzslMetrics m;
  auto mean_of = [](const std::map<ClassId, double>& accs) {
    double s = 0.0;
    for (const auto& [c, a] : accs) s += a;
    return s / static_cast<double>(accs.size());
  };
  m.S = mean_of(seen);
  m.U = mean_of(unseen);
  m.H = harmonic_mean(m.S, m.U);
  m.per_class_acc = seen;
  m.per_class_acc.insert(unseen.begin(), unseen.end());
  return m;
}

GzslMetrics evaluate_gzsl(const SoftmaxClassifier& classifier, const DatasetBundle& bundle) {
  for (ClassId c : bundle.seen_classes) classifier.index_of(c);
  for (ClassId c : bundle.unseen_classes) classifier.index_of(c);
  const auto seen_idx = bundle.indices(Split::kTestSeen);
  const auto unseen_idx = bundle.indices(Split::kTestUnseen);
  if (seen_idx.empty()) throw ArgumentError("test_seen split is empty");
  if (unseen_idx.empty()) throw ArgumentError("test_unseen split is empty");
  return gzsl_metrics(classifier.predict(bundle.rows(seen_idx)), bundle.labels_at(seen_idx),
                      classifier.predict(bundle.rows(unseen_idx)), bundle.labels_at(unseen_idx), bundle);
}

std::string metrics_json(const GzslMetrics& m) {
  nlohmann::ordered_json j;
  j["U"] = m.U;
  j["S"] = m.S;
  j["H"] = m.H;
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& [c, a] : m.per_class_acc) per[std::to_string(c)] = a;
  j["per_class"] = per;
  return j.dump(2) + "\n";
}

void write_metrics(const GzslMetrics& m, const std::filesystem::path& json_path, const std::filesystem::path& csv_path) {
  io::write_text(json_path, metrics_json(m));
  io::CsvTable csv{{"metric", "value"}, {}};
  csv.rows.push_back({"U", io::format_double(m.U)});
  csv.rows.push_back({"S", io::format_double(m.S)});
  csv.rows.push_back({"H", io::format_double(m.H)});
  for (const auto& [c, a] : m.per_class_acc) csv.rows.push_back({"class_" + std::to_string(c), io::format_double(a)});
  io::write_csv(csv_path, csv);
}

}  // namespace sdfa
