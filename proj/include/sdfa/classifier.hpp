#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdfa/network.hpp"

namespace sdfa {

/// Affine + softmax classifier over an explicit class list.
class SoftmaxClassifier {
 public:
  SoftmaxClassifier() = default;
  SoftmaxClassifier(std::string name, int d_x, std::vector<ClassId> classes, std::uint64_t seed);

  const std::vector<ClassId>& classes() const { return classes_; }
  int index_of(ClassId c) const;  // throws ArgumentError for unknown classes
  std::vector<int> indices_of(const std::vector<ClassId>& labels) const;

  Matrix logits(const Matrix& x) const { return net_.forward(x); }
  std::vector<ClassId> predict(const Matrix& x) const;

  nn::Mlp& net() { return net_; }
  const nn::Mlp& net() const { return net_; }

  bool operator==(const SoftmaxClassifier& o) const { return classes_ == o.classes_ && net_ == o.net_; }

 private:
  std::vector<ClassId> classes_;
  nn::Mlp net_;
};

struct ClassifierTraining {
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 1e-2;
  std::uint64_t seed = 0;
};

/// Minibatch cross-entropy training with Adam. Returns the training-set
/// accuracy after the last epoch.
double train_classifier(SoftmaxClassifier& clf, const Matrix& x, const std::vector<ClassId>& labels,
                        const ClassifierTraining& cfg);

}  // namespace sdfa
