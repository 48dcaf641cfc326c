#include "embryostage/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace embryostage::rng {

std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over seed + golden-ratio-spaced stream tag.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) {  // full 64-bit range
    return static_cast<std::int64_t>(engine_());
  }
  // rejection sampling on the top of the range to avoid modulo bias
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % span + 1) % span;
  std::uint64_t draw;
  do {
    draw = engine_();
  } while (draw > limit);
  return lo + static_cast<std::int64_t>(draw % span);
}

double Rng::gaussian() {
  if (has_cached_gaussian_) {
    has_cached_gaussian_ = false;
    return cached_gaussian_;
  }
  double u1;
  do {  // guard against log(0)
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_gaussian_ = radius * std::sin(angle);
  has_cached_gaussian_ = true;
  return radius * std::cos(angle);
}

std::array<double, 3> Rng::unit_vector() {
  while (true) {
    const double x = gaussian(), y = gaussian(), z = gaussian();
    const double norm = std::sqrt(x * x + y * y + z * z);
    if (norm > 1e-12) return {x / norm, y / norm, z / norm};
  }
}

std::array<double, 9> Rng::rotation_matrix() {
  double w, x, y, z;
  while (true) {
    w = gaussian();
    x = gaussian();
    y = gaussian();
    z = gaussian();
    const double norm = std::sqrt(w * w + x * x + y * y + z * z);
    if (norm > 1e-12) {
      w /= norm;
      x /= norm;
      y /= norm;
      z /= norm;
      break;
    }
  }
  return {
      1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
      2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y),
  };
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
  if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  // partial Fisher-Yates: after i swaps, pool[0..i) is the sample
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(
        uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(n) - 1));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace embryostage::rng
