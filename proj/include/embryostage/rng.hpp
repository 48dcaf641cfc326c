// Seeded random helpers with fully specified distribution algorithms.
//
// std::mt19937_64 output is pinned by the standard, but the standard
// <random> distributions are not; every distribution used here is implemented
// explicitly so that equal seeds give bit-identical streams on any platform.
#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace embryostage::rng {

/// splitmix64 mix of a base seed and a stream tag; used to derive independent
/// sub-streams (per frame, per sample, per run) from one user-facing seed.
std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);

  /// Uniform integer in [lo, hi] without modulo bias.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Standard normal via Box-Muller (second value cached).
  double gaussian();

  /// Uniform direction on the unit sphere.
  std::array<double, 3> unit_vector();

  /// Uniform proper rotation (det +1), row-major 3x3, from a uniform unit
  /// quaternion.
  std::array<double, 9> rotation_matrix();

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(values[i - 1], values[j]);
    }
  }

  /// k distinct indices drawn uniformly from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
  double cached_gaussian_ = 0.0;
  bool has_cached_gaussian_ = false;
};

}  // namespace embryostage::rng
