#pragma once

#include <filesystem>
#include <vector>

#include "sdfa/grouping.hpp"

namespace sdfa {

/// A class attribute with one group zeroed. group_index 0 is the complete
/// vector; the self-supervision label equals the group index.
struct AugmentedAttribute {
  Vector vector;
  int group_index = 0;
  ClassId source_class = 0;

  int label() const { return group_index; }
};

/// Copy of `a` with the dimensions of group `i` set to 0 (i = 0 returns a copy).
Vector mask_group(const Vector& a, const AttributeGroups& groups, int i);

/// Row-wise mask_group over a batch of attribute rows.
Matrix mask_group_rows(const Matrix& rows, const AttributeGroups& groups, int i);

/// True when masking group i leaves `a` unchanged.
bool mask_is_noop(const Vector& a, const AttributeGroups& groups, int i);

/// Per class (ascending), the m masked variants in group order, preceded by
/// the complete variant when `include_complete`. `drop_noop_masks` removes
/// masked variants whose group was already all-zero.
std::vector<AugmentedAttribute> build_augmented_set(const Matrix& attributes, const AttributeGroups& groups,
                                                    bool include_complete, bool drop_noop_masks = false);

void export_augmented_set(const std::vector<AugmentedAttribute>& set, const std::filesystem::path& path);

}  // namespace sdfa
