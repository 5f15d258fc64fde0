#include "sdfa/augmentation.hpp"

#include "sdfa/errors.hpp"
#include "sdfa/io.hpp"

namespace sdfa {

namespace {

void check_mask_args(Eigen::Index width, const AttributeGroups& groups, int i) {
  if (i < 0 || i > groups.m)
    throw ArgumentError("group index " + std::to_string(i) + " outside 0.." + std::to_string(groups.m));
  if (static_cast<Eigen::Index>(groups.assignment.size()) != width)
    throw ShapeError("attribute width does not match group assignment");
}

}  // namespace

Vector mask_group(const Vector& a, const AttributeGroups& groups, int i) {
  check_mask_args(a.size(), groups, i);
  Vector out = a;
  if (i == 0) return out;
  for (Eigen::Index j = 0; j < out.size(); ++j)
    if (groups.assignment[static_cast<std::size_t>(j)] == i) out(j) = 0.0;
  return out;
}

Matrix mask_group_rows(const Matrix& rows, const AttributeGroups& groups, int i) {
  check_mask_args(rows.cols(), groups, i);
  Matrix out = rows;
  if (i == 0) return out;
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    if (groups.assignment[static_cast<std::size_t>(j)] == i) out.col(j).setZero();
  return out;
}

bool mask_is_noop(const Vector& a, const AttributeGroups& groups, int i) {
  check_mask_args(a.size(), groups, i);
  if (i == 0) return true;
  for (Eigen::Index j = 0; j < a.size(); ++j)
    if (groups.assignment[static_cast<std::size_t>(j)] == i && a(j) != 0.0) return false;
  return true;
}

std::vector<AugmentedAttribute> build_augmented_set(const Matrix& attributes, const AttributeGroups& groups,
                                                    bool include_complete, bool drop_noop_masks) {
  std::vector<AugmentedAttribute> out;
  out.reserve(static_cast<std::size_t>(attributes.rows() * (groups.m + 1)));
  for (Eigen::Index c = 0; c < attributes.rows(); ++c) {
    const Vector a = attributes.row(c).transpose();
    for (int i = include_complete ? 0 : 1; i <= groups.m; ++i) {
      if (i > 0 && drop_noop_masks && mask_is_noop(a, groups, i)) continue;
      out.push_back(AugmentedAttribute{mask_group(a, groups, i), i, static_cast<ClassId>(c)});
    }
  }
  return out;
}

void export_augmented_set(const std::vector<AugmentedAttribute>& set, const std::filesystem::path& path) {
  io::CsvTable csv{{"class", "group_index"}, {}};
  if (!set.empty())
    for (Eigen::Index j = 0; j < set.front().vector.size(); ++j) csv.header.push_back("a" + std::to_string(j));
  for (const auto& v : set) {
    std::vector<std::string> row{std::to_string(v.source_class), std::to_string(v.group_index)};
    for (Eigen::Index j = 0; j < v.vector.size(); ++j) row.push_back(io::format_double(v.vector(j)));
    csv.rows.push_back(std::move(row));
  }
  io::write_csv(path, csv);
}

}  // namespace sdfa
