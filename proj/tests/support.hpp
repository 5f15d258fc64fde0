#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "sdfa/dataset.hpp"
#include "sdfa/grouping.hpp"

namespace sdfa::test {

// Fresh directory under the system temp dir; removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("sdfa_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline SyntheticSpec tiny_spec(std::uint64_t seed = 7) {
  SyntheticSpec s;
  s.d_a = 8;
  s.d_x = 6;
  s.m_true = 2;
  s.n_seen_classes = 4;
  s.n_unseen_classes = 2;
  s.instances_per_class = 10;
  s.d_w = 4;
  s.seed = seed;
  return s;
}

inline AttributeGroups contiguous_groups(int d_a, int m) {
  AttributeGroups g;
  g.m = m;
  for (int j = 0; j < d_a; ++j) g.assignment.push_back(j * m / d_a + 1);
  g.centroids = Matrix::Zero(m, 2);
  return g;
}

}  // namespace sdfa::test
