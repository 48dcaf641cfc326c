// Shared test helpers: brute-force spatial oracles, finite-difference
// gradient checks, and small embryo fixtures. Oracles are deliberately
// independent of the library's query/backward implementations.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "embryostage/core.hpp"
#include "embryostage/graph.hpp"
#include "embryostage/tensor.hpp"

namespace testutil {

// --------------------------------------------------------------------------
// brute-force spatial oracles (O(n) per query)

struct BruteNeighbor {
  int id;
  double dist;
};

inline std::vector<BruteNeighbor> brute_knn(const std::vector<embryostage::Point3>& points,
                                            const embryostage::Point3& q, int k,
                                            int exclude_id = -1) {
  std::vector<BruteNeighbor> all;
  all.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (static_cast<int>(i) == exclude_id) continue;
    all.push_back(BruteNeighbor{static_cast<int>(i), embryostage::distance(points[i], q)});
  }
  std::sort(all.begin(), all.end(), [](const BruteNeighbor& a, const BruteNeighbor& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    return a.id < b.id;
  });
  if (all.size() > static_cast<std::size_t>(k)) all.resize(static_cast<std::size_t>(k));
  return all;
}

inline int brute_count_in_radius(const std::vector<embryostage::Point3>& points,
                                 const embryostage::Point3& q, double r, int exclude_id = -1) {
  int count = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (static_cast<int>(i) == exclude_id) continue;
    if (embryostage::distance(points[i], q) <= r) ++count;
  }
  return count;
}

// --------------------------------------------------------------------------
// random clouds (std::mt19937 is fine here; tests fix their own seeds)

inline std::vector<embryostage::Point3> random_points(std::size_t n, std::uint32_t seed,
                                                      double extent = 100.0) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> dist(-extent, extent);
  std::vector<embryostage::Point3> points(n);
  for (auto& p : points) p = embryostage::Point3{dist(gen), dist(gen), dist(gen)};
  return points;
}

inline embryostage::ad::Tensor random_cloud(std::int64_t n, std::uint32_t seed,
                                            double extent = 1.0) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> dist(-extent, extent);
  embryostage::ad::Tensor cloud = embryostage::ad::Tensor::uninit({n, 3});
  for (std::int64_t i = 0; i < cloud.size(); ++i) cloud[i] = dist(gen);
  return cloud;
}

// --------------------------------------------------------------------------
// finite-difference gradient checking

/// Central-difference check of d(scalar)/d(input entries) against the graph's
/// backward pass. `build` must construct the scalar loss node from scratch on
/// every call (the input tensor is perturbed between calls). Checks every
/// entry of `input` unless `max_entries` trims it. Returns the worst relative
/// error; entries where `skip` returns true are ignored.
struct GradCheckResult {
  double worst_rel_err = 0.0;
  int checked = 0;
};

inline GradCheckResult gradient_check(
    embryostage::ad::Tensor& input,
    const std::function<embryostage::ad::Graph::NodeId(embryostage::ad::Graph&)>& build,
    const std::function<const embryostage::ad::Tensor*(const embryostage::ad::Graph&)>&
        grad_of_input,
    int max_entries = -1, const std::function<bool(std::int64_t)>& skip = {}) {
  using embryostage::ad::Graph;

  Graph base;
  const Graph::NodeId root = build(base);
  base.backward(root);
  const embryostage::ad::Tensor* analytic = grad_of_input(base);
  REQUIRE(analytic != nullptr);

  const double h = 1e-6;
  GradCheckResult result;
  const std::int64_t total = input.size();
  const std::int64_t stride =
      (max_entries > 0 && total > max_entries) ? total / max_entries : 1;
  for (std::int64_t i = 0; i < total; i += stride) {
    if (skip && skip(i)) continue;
    const double saved = input[i];
    input[i] = saved + h;
    Graph plus;
    const double f_plus = plus.value(build(plus))[0];
    input[i] = saved - h;
    Graph minus;
    const double f_minus = minus.value(build(minus))[0];
    input[i] = saved;

    const double fd = (f_plus - f_minus) / (2.0 * h);
    const double ad = (*analytic)[i];
    const double rel = std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
    result.worst_rel_err = std::max(result.worst_rel_err, rel);
    ++result.checked;
  }
  return result;
}

// --------------------------------------------------------------------------
// embryo fixtures

/// Constant-count drifting grid with exact tracks: nx*ny*nz points spaced
/// `spacing` apart, translated by `step` every frame.
inline embryostage::Embryo4D drifting_grid_embryo(int frames, int nx, int ny, int nz,
                                                  double spacing,
                                                  const embryostage::Point3& step) {
  embryostage::Embryo4D embryo;
  embryo.label_map = embryostage::StageLabelMap{4.7, 10.0, frames};
  for (int k = 0; k < frames; ++k) {
    embryostage::Frame frame;
    frame.index = k;
    for (int ix = 0; ix < nx; ++ix) {
      for (int iy = 0; iy < ny; ++iy) {
        for (int iz = 0; iz < nz; ++iz) {
          frame.points.push_back(embryostage::Point3{ix * spacing + k * step.x,
                                                     iy * spacing + k * step.y,
                                                     iz * spacing + k * step.z});
          frame.displacements.push_back(
              k == 0 ? embryostage::Displacement3::absent()
                     : embryostage::Displacement3::of(step.x, step.y, step.z));
        }
      }
    }
    embryo.frames.push_back(std::move(frame));
  }
  return embryo;
}

}  // namespace testutil
