#include "sdfa/classifier.hpp"

#include <algorithm>
#include <numeric>

#include "sdfa/errors.hpp"
#include "sdfa/rng.hpp"

namespace sdfa {

SoftmaxClassifier::SoftmaxClassifier(std::string name, int d_x, std::vector<ClassId> classes, std::uint64_t seed)
    : classes_(std::move(classes)) {
  std::sort(classes_.begin(), classes_.end());
  if (classes_.empty()) throw ArgumentError("classifier needs at least one class");
  net_ = nn::Mlp(nn::NetworkSpec{std::move(name), {d_x, static_cast<int>(classes_.size())}, nn::Activation::kNone, seed});
}

int SoftmaxClassifier::index_of(ClassId c) const {
  auto it = std::lower_bound(classes_.begin(), classes_.end(), c);
  if (it == classes_.end() || *it != c) throw ArgumentError("class " + std::to_string(c) + " not covered by classifier");
  return static_cast<int>(it - classes_.begin());
}

std::vector<int> SoftmaxClassifier::indices_of(const std::vector<ClassId>& labels) const {
  std::vector<int> out;
  out.reserve(labels.size());
  for (ClassId c : labels) out.push_back(index_of(c));
  return out;
}

std::vector<ClassId> SoftmaxClassifier::predict(const Matrix& x) const {
  std::vector<ClassId> out;
  for (int k : nn::argmax_rows(logits(x))) out.push_back(classes_[static_cast<std::size_t>(k)]);
  return out;
}

double train_classifier(SoftmaxClassifier& clf, const Matrix& x, const std::vector<ClassId>& labels,
                        const ClassifierTraining& cfg) {
  if (x.rows() == 0) throw ValidationError("classifier training set is empty");
  if (static_cast<Eigen::Index>(labels.size()) != x.rows()) throw ShapeError("label count does not match rows");
  if (cfg.batch_size < 1 || cfg.epochs < 0) throw ArgumentError("invalid classifier training schedule");
  const std::vector<int> targets = clf.indices_of(labels);

  nn::AdamState opt(clf.net(), nn::AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8, 0.0});
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto eng = rng::stream(cfg.seed, "classifier/" + clf.net().spec().name, {static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), eng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Matrix xb(static_cast<Eigen::Index>(end - start), x.cols());
      std::vector<int> tb;
      for (std::size_t k = start; k < end; ++k) {
        xb.row(static_cast<Eigen::Index>(k - start)) = x.row(order[k]);
        tb.push_back(targets[static_cast<std::size_t>(order[k])]);
      }
      nn::ForwardCache cache;
      const Matrix logits = clf.net().forward(xb, cache);
      Matrix adj;
      nn::softmax_cross_entropy(logits, tb, &adj);
      opt.step(clf.net(), clf.net().backward(cache, adj), "classifier_ce");
    }
  }
  const auto pred = nn::argmax_rows(clf.logits(x));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == targets[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

}  // namespace sdfa
