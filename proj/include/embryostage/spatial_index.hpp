// Exact k-nearest-neighbor and fixed-radius counting over one frame's points.
#pragma once

#include <cstdint>
#include <vector>

#include "embryostage/core.hpp"

namespace embryostage {

struct Neighbor {
  int id = -1;        // index into the point array the tree was built from
  double dist = 0.0;  // Euclidean distance to the query
};

/// Balanced kd-tree over an immutable copy of the input points. Queries are
/// exact; distance ties are broken toward the lower point id so results are
/// reproducible regardless of tree layout.
///
/// The index never mutates after construction, so concurrent queries from
/// many threads are safe.
class SpatialIndex {
 public:
  /// Builds the tree. Splits on the axis of largest spread at the median;
  /// leaves hold up to 16 points. Throws std::invalid_argument on empty or
  /// non-finite input.
  explicit SpatialIndex(const std::vector<Point3>& points);

  std::size_t size() const { return points_.size(); }
  const Point3& point(int id) const { return points_[static_cast<std::size_t>(id)]; }

  /// The k nearest points to q, ascending by (distance, id). Returns fewer
  /// than k only when the index holds fewer candidates. exclude_id skips the
  /// point with that id (pass the query's own id for self-exclusion, or -1).
  std::vector<Neighbor> knn(const Point3& q, int k, int exclude_id = -1) const;

  /// Number of points with distance <= r from q (boundary inclusive),
  /// optionally excluding one id.
  int count_in_radius(const Point3& q, double r, int exclude_id = -1) const;

 private:
  struct Node {
    // leaf: [begin, end) into order_; internal: split axis/value + children
    std::int32_t begin = 0;
    std::int32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int8_t axis = -1;
    double split = 0.0;
    double bbox_min[3];
    double bbox_max[3];

    bool is_leaf() const { return left < 0; }
  };

  std::int32_t build(std::int32_t begin, std::int32_t end);
  void compute_bbox(Node& node) const;

  std::vector<Point3> points_;
  std::vector<std::int32_t> order_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;

  static constexpr std::int32_t kLeafSize = 16;
};

}  // namespace embryostage
