#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace sdfa::rng {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Substream seed derived from a master seed, a name and integer tags. Equal
// inputs give equal streams; consumers never share an engine.
inline std::uint64_t derive(std::uint64_t master, std::string_view name,
                            std::initializer_list<std::uint64_t> tags = {}) {
  std::uint64_t h = splitmix64(master ^ splitmix64(hash_name(name)));
  for (std::uint64_t t : tags) h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
  return h;
}

inline Engine stream(std::uint64_t master, std::string_view name, std::initializer_list<std::uint64_t> tags = {}) {
  return Engine(derive(master, name, tags));
}

inline Eigen::MatrixXd normal(Engine& eng, Eigen::Index rows, Eigen::Index cols, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(eng);
  return m;
}

inline Eigen::MatrixXd uniform(Engine& eng, Eigen::Index rows, Eigen::Index cols, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(eng);
  return m;
}

}  // namespace sdfa::rng
