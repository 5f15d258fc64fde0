#include "sdfa/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "sdfa/errors.hpp"

namespace sdfa::report {

Pca fit_pca(const Matrix& data, int k) {
  if (data.rows() < 2) throw ArgumentError("PCA needs at least two rows");
  if (k < 1 || k > data.cols()) throw ArgumentError("PCA component count out of range");
  Pca pca;
  pca.mean = data.colwise().mean().transpose();
  const Matrix centred = data.rowwise() - pca.mean.transpose();
  const Matrix cov = centred.transpose() * centred / static_cast<double>(data.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::kNumeric, "eigendecomposition failed");
  const Eigen::Index d = data.cols();
  pca.components.resize(d, k);
  pca.variances.resize(k);
  for (int c = 0; c < k; ++c) {
    Vector v = solver.eigenvectors().col(d - 1 - c);
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < d; ++j)
      if (std::abs(v(j)) > std::abs(v(arg))) arg = j;
    if (v(arg) < 0.0) v = -v;
    pca.components.col(c) = v;
    pca.variances(c) = solver.eigenvalues()(d - 1 - c);
  }
  return pca;
}

Matrix project(const Pca& pca, const Matrix& data) {
  if (data.cols() != pca.mean.size()) throw ShapeError("projection width mismatch");
  return (data.rowwise() - pca.mean.transpose()) * pca.components;
}

namespace {

constexpr std::array<const char*, 12> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                                               "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939"};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(2);
  s << std::fixed << v;
  return s.str();
}

}  // namespace

std::string scatter_svg(const Matrix& points, const std::vector<ClassId>& labels, const std::vector<bool>& synthesized,
                        const std::string& title) {
  if (points.cols() != 2) throw ShapeError("scatter needs 2-D points");
  if (static_cast<Eigen::Index>(labels.size()) != points.rows() || labels.size() != synthesized.size())
    throw ShapeError("label/marker count mismatch");
  constexpr double width = 640, height = 640, pad = 40;
  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  if (points.rows() > 0) {
    x_lo = points.col(0).minCoeff();
    x_hi = points.col(0).maxCoeff();
    y_lo = points.col(1).minCoeff();
    y_hi = points.col(1).maxCoeff();
  }
  const double sx = (width - 2 * pad) / std::max(x_hi - x_lo, 1e-12);
  const double sy = (height - 2 * pad) / std::max(y_hi - y_lo, 1e-12);

  std::vector<ClassId> classes = labels;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << pad << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    const double x = pad + (points(r, 0) - x_lo) * sx;
    const double y = height - pad - (points(r, 1) - y_lo) * sy;
    const auto cls = static_cast<std::size_t>(
        std::lower_bound(classes.begin(), classes.end(), labels[static_cast<std::size_t>(r)]) - classes.begin());
    const char* colour = kPalette[cls % kPalette.size()];
    if (synthesized[static_cast<std::size_t>(r)]) {
      svg << "<path class=\"pt synth\" d=\"M" << fmt(x - 3) << ' ' << fmt(y - 3) << "L" << fmt(x + 3) << ' '
          << fmt(y + 3) << "M" << fmt(x - 3) << ' ' << fmt(y + 3) << "L" << fmt(x + 3) << ' ' << fmt(y - 3)
          << "\" stroke=\"" << colour << "\" stroke-width=\"1\"/>\n";
    } else {
      svg << "<circle class=\"pt real\" cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"2.5\" fill=\"none\" stroke=\""
          << colour << "\"/>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string loss_curves_svg(const TrainingLog& log) {
  const auto terms = log.terms();
  constexpr double width = 640, panel = 120, pad = 30;
  const double height = pad + panel * static_cast<double>(std::max<std::size_t>(terms.size(), 1));
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const auto values = log.series(terms[t]);
    const double top = pad + panel * static_cast<double>(t);
    const double lo = *std::min_element(values.begin(), values.end());
    const double hi = *std::max_element(values.begin(), values.end());
    const double span = std::max(hi - lo, 1e-12);
    svg << "<text x=\"" << pad << "\" y=\"" << fmt(top + 12) << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << terms[t] << " [" << lo << ", " << hi << "]</text>\n";
    svg << "<polyline class=\"curve\" fill=\"none\" stroke=\"" << kPalette[t % kPalette.size()] << "\" points=\"";
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double x =
          pad + (width - 2 * pad) * (values.size() > 1 ? static_cast<double>(k) / static_cast<double>(values.size() - 1) : 0.0);
      const double y = top + panel - 10 - (panel - 30) * (values[k] - lo) / span;
      svg << (k ? " " : "") << fmt(x) << ',' << fmt(y);
    }
    svg << "\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace sdfa::report
