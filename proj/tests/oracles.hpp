#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "sdfa/dataset.hpp"
#include "sdfa/network.hpp"

namespace sdfa::test {

// Exhaustive minimum of the within-group squared distance over every
// assignment of the rows into m non-empty groups.
inline double brute_force_objective(const Matrix& points, int m) {
  const auto n = static_cast<int>(points.rows());
  std::vector<int> a(static_cast<std::size_t>(n), 0);
  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    std::vector<int> count(static_cast<std::size_t>(m), 0);
    for (int g : a) ++count[static_cast<std::size_t>(g)];
    bool all = true;
    for (int c : count) all = all && c > 0;
    if (all) {
      Matrix mean = Matrix::Zero(m, points.cols());
      for (int j = 0; j < n; ++j) mean.row(a[static_cast<std::size_t>(j)]) += points.row(j);
      for (int g = 0; g < m; ++g) mean.row(g) /= count[static_cast<std::size_t>(g)];
      double obj = 0.0;
      for (int j = 0; j < n; ++j) obj += (points.row(j) - mean.row(a[static_cast<std::size_t>(j)])).squaredNorm();
      best = std::min(best, obj);
    }
    int k = 0;
    while (k < n && ++a[static_cast<std::size_t>(k)] == m) a[static_cast<std::size_t>(k++)] = 0;
    if (k == n) break;
  }
  return best;
}

// Central differences of f at every entry of `params`.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> params, double h = 1e-6) {
  std::vector<double> g(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double keep = params[k];
    params[k] = keep + h;
    const double up = f(params);
    params[k] = keep - h;
    const double down = f(params);
    params[k] = keep;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

// max_k |a_k - b_k| / max(1, max |b|): relative to the gradient scale.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double scale = 1.0, worst = 0.0;
  for (double v : b) scale = std::max(scale, std::abs(v));
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
  return worst / scale;
}

}  // namespace sdfa::test
