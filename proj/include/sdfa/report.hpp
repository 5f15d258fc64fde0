#pragma once

#include <string>
#include <vector>

#include "sdfa/dataset.hpp"
#include "sdfa/gan.hpp"

namespace sdfa::report {

struct Pca {
  Vector mean;
  Matrix components;  // d x k, orthonormal columns, descending variance
  Vector variances;   // k
};

/// Covariance eigendecomposition. Each component is sign-fixed so that its
/// largest-magnitude coordinate is positive (first such coordinate on ties).
Pca fit_pca(const Matrix& data, int k);
Matrix project(const Pca& pca, const Matrix& data);

/// One element per point, tagged class="pt": circles for real rows, crosses
/// for synthesized rows, one colour per class.
std::string scatter_svg(const Matrix& points, const std::vector<ClassId>& labels, const std::vector<bool>& synthesized,
                        const std::string& title);

/// One panel per logged term, each a polyline over epochs.
std::string loss_curves_svg(const TrainingLog& log);

}  // namespace sdfa::report
