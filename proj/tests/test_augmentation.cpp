#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sdfa/augmentation.hpp"
#include "sdfa/errors.hpp"
#include "sdfa/io.hpp"
#include "sdfa/rng.hpp"
#include "support.hpp"

using namespace sdfa;
using sdfa::test::contiguous_groups;

TEST_CASE("masking zeroes exactly the chosen group") {
  Vector a(6);
  a << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
  const auto g = contiguous_groups(6, 3);  // {1,1,2,2,3,3}
  Vector want(6);
  want << 0.1, 0.2, 0, 0, 0.5, 0.6;
  CHECK(mask_group(a, g, 2) == want);
  CHECK(mask_group(a, g, 0) == a);
  CHECK_THROWS_AS(mask_group(a, g, 4), ArgumentError);
  CHECK_THROWS_AS(mask_group(a, g, -1), ArgumentError);
  CHECK_THROWS_AS(mask_group(Vector::Ones(5), g, 1), ShapeError);
}

TEST_CASE("masking properties over random partitions") {
  auto eng = rng::stream(3, "test/aug");
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + trial % 9;
    const int m = 2 + trial % (d - 1);
    AttributeGroups g;
    g.m = m;
    for (int j = 0; j < d; ++j) g.assignment.push_back(j < m ? j + 1 : static_cast<int>(eng() % m) + 1);
    const Vector a = rng::uniform(eng, d, 1);
    Vector sum = Vector::Zero(d);
    for (int i = 1; i <= m; ++i) {
      const Vector ai = mask_group(a, g, i);
      sum += a - ai;
      CHECK(mask_group(ai, g, i) == ai);
      CHECK(mask_group(Vector(2.5 * a), g, i) == Vector(2.5 * ai));
    }
    CHECK(sum == a);
  }
}

TEST_CASE("augmented set order and labels") {
  Matrix attrs(2, 4);
  attrs << 1, 2, 3, 4, 5, 6, 7, 8;
  const auto g = contiguous_groups(4, 2);
  const auto set = build_augmented_set(attrs, g, true);
  REQUIRE(set.size() == 6);
  for (std::size_t k = 0; k < set.size(); ++k) {
    CHECK(set[k].source_class == static_cast<ClassId>(k / 3));
    CHECK(set[k].group_index == static_cast<int>(k % 3));
    CHECK(set[k].label() == set[k].group_index);
    CHECK(set[k].vector == mask_group(attrs.row(set[k].source_class).transpose(), g, set[k].group_index));
  }
  CHECK(build_augmented_set(attrs, g, false).size() == 4);
}

TEST_CASE("no-op masks are kept by default and dropped on request") {
  Matrix attrs(1, 4);
  attrs << 0, 0, 0.5, 0.7;
  const auto g = contiguous_groups(4, 2);
  CHECK(mask_is_noop(attrs.row(0).transpose(), g, 1));
  CHECK_FALSE(mask_is_noop(attrs.row(0).transpose(), g, 2));
  CHECK(build_augmented_set(attrs, g, false).size() == 2);
  const auto dropped = build_augmented_set(attrs, g, false, true);
  REQUIRE(dropped.size() == 1);
  CHECK(dropped[0].group_index == 2);
}

TEST_CASE("row-wise masking matches per-row masking") {
  auto eng = rng::stream(5, "test/rows");
  const Matrix rows = rng::uniform(eng, 7, 6);
  const auto g = contiguous_groups(6, 3);
  const Matrix out = mask_group_rows(rows, g, 3);
  for (Eigen::Index r = 0; r < rows.rows(); ++r)
    CHECK(out.row(r).transpose() == mask_group(rows.row(r).transpose(), g, 3));
}

TEST_CASE("synthetic attributes: every variant satisfies the invariants") {
  const auto bench = generate_synthetic_benchmark(SyntheticSpec{});
  AttributeGroups g;
  g.m = 4;
  g.assignment = bench.ground_truth_groups;
  const auto set = build_augmented_set(bench.bundle.attributes, g, true);
  CHECK(set.size() == static_cast<std::size_t>(bench.bundle.n_classes() * 5));
  for (const auto& v : set) {
    const Vector a = bench.bundle.attributes.row(v.source_class).transpose();
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      const bool in_group = g.assignment[static_cast<std::size_t>(j)] == v.group_index;
      CHECK(v.vector(j) == (in_group ? 0.0 : a(j)));
    }
  }
}

TEST_CASE("export writes one row per variant") {
  test::TempDir dir("aug");
  Matrix attrs(3, 4);
  attrs.setConstant(0.5);
  const auto set = build_augmented_set(attrs, contiguous_groups(4, 2), true);
  export_augmented_set(set, dir / "aug.csv");
  const auto csv = io::read_csv(dir / "aug.csv");
  CHECK(csv.rows.size() == set.size());
  CHECK(csv.header.size() == 2 + 4);
}
