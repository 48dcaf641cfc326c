#include "embryostage/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace embryostage {

namespace {

double coord(const Point3& p, int axis) {
  switch (axis) {
    case 0: return p.x;
    case 1: return p.y;
    default: return p.z;
  }
}

/// Squared distance from q to the axis-aligned box [lo, hi].
double squared_box_distance(const Point3& q, const double lo[3], const double hi[3]) {
  const double qc[3] = {q.x, q.y, q.z};
  double acc = 0.0;
  for (int a = 0; a < 3; ++a) {
    double d = 0.0;
    if (qc[a] < lo[a]) d = lo[a] - qc[a];
    else if (qc[a] > hi[a]) d = qc[a] - hi[a];
    acc += d * d;
  }
  return acc;
}

/// Squared distance from q to the farthest corner of the box.
double squared_box_far_distance(const Point3& q, const double lo[3], const double hi[3]) {
  const double qc[3] = {q.x, q.y, q.z};
  double acc = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double d = std::max(std::abs(qc[a] - lo[a]), std::abs(qc[a] - hi[a]));
    acc += d * d;
  }
  return acc;
}

struct Candidate {
  double d2;
  std::int32_t id;

  // worst candidate first: larger distance, then larger id
  bool operator<(const Candidate& other) const {
    if (d2 != other.d2) return d2 < other.d2;
    return id < other.id;
  }
};

/// Bounded max-heap of the best k (distance, id) pairs seen so far.
class KnnHeap {
 public:
  KnnHeap(std::size_t k, std::vector<Candidate>& storage) : k_(k), heap_(storage) {
    heap_.clear();
  }

  bool full() const { return heap_.size() == k_; }
  double worst_d2() const { return heap_.front().d2; }

  bool admits(const Candidate& c) const {
    return !full() || c < heap_.front();
  }

  void push(const Candidate& c) {
    if (!full()) {
      heap_.push_back(c);
      std::push_heap(heap_.begin(), heap_.end());
      return;
    }
    if (c < heap_.front()) {
      std::pop_heap(heap_.begin(), heap_.end());
      heap_.back() = c;
      std::push_heap(heap_.begin(), heap_.end());
    }
  }

  std::vector<Candidate>& finish() {
    std::sort_heap(heap_.begin(), heap_.end());
    return heap_;
  }

 private:
  std::size_t k_;
  std::vector<Candidate>& heap_;
};

}  // namespace

SpatialIndex::SpatialIndex(const std::vector<Point3>& points) : points_(points) {
  if (points_.empty()) {
    throw std::invalid_argument("SpatialIndex: cannot build over an empty point set");
  }
  for (const Point3& p : points_) {
    if (!p.finite()) {
      throw std::invalid_argument("SpatialIndex: non-finite coordinate");
    }
  }
  order_.resize(points_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<std::int32_t>(i);
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  root_ = build(0, static_cast<std::int32_t>(points_.size()));
}

void SpatialIndex::compute_bbox(Node& node) const {
  for (int a = 0; a < 3; ++a) {
    node.bbox_min[a] = std::numeric_limits<double>::infinity();
    node.bbox_max[a] = -std::numeric_limits<double>::infinity();
  }
  for (std::int32_t i = node.begin; i < node.end; ++i) {
    const Point3& p = points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])];
    const double c[3] = {p.x, p.y, p.z};
    for (int a = 0; a < 3; ++a) {
      node.bbox_min[a] = std::min(node.bbox_min[a], c[a]);
      node.bbox_max[a] = std::max(node.bbox_max[a], c[a]);
    }
  }
}

std::int32_t SpatialIndex::build(std::int32_t begin, std::int32_t end) {
  Node node;
  node.begin = begin;
  node.end = end;
  compute_bbox(node);

  if (end - begin > kLeafSize) {
    // split the axis of largest spread at the median
    int axis = 0;
    double best_spread = -1.0;
    for (int a = 0; a < 3; ++a) {
      const double spread = node.bbox_max[a] - node.bbox_min[a];
      if (spread > best_spread) {
        best_spread = spread;
        axis = a;
      }
    }
    const std::int32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [this, axis](std::int32_t lhs, std::int32_t rhs) {
                       const double cl = coord(points_[static_cast<std::size_t>(lhs)], axis);
                       const double cr = coord(points_[static_cast<std::size_t>(rhs)], axis);
                       if (cl != cr) return cl < cr;
                       return lhs < rhs;
                     });
    node.axis = static_cast<std::int8_t>(axis);
    node.split = coord(points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(mid)])], axis);
    const std::int32_t self = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    nodes_[static_cast<std::size_t>(self)].left = left;
    nodes_[static_cast<std::size_t>(self)].right = right;
    return self;
  }

  const std::int32_t self = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(node);
  return self;
}

std::vector<Neighbor> SpatialIndex::knn(const Point3& q, int k, int exclude_id) const {
  if (k < 1) throw std::invalid_argument("knn: k must be >= 1");

  std::vector<Candidate> storage;
  storage.reserve(static_cast<std::size_t>(k) + 1);
  KnnHeap heap(static_cast<std::size_t>(k), storage);

  // iterative depth-first descent, nearer child first
  std::vector<std::int32_t> stack;
  stack.push_back(root_);
  while (!stack.empty()) {
    const Node& node = nodes_[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    const double lower = squared_box_distance(q, node.bbox_min, node.bbox_max);
    if (heap.full() && lower > heap.worst_d2()) continue;
    if (node.is_leaf()) {
      for (std::int32_t i = node.begin; i < node.end; ++i) {
        const std::int32_t id = order_[static_cast<std::size_t>(i)];
        if (id == exclude_id) continue;
        const Candidate c{squared_distance(q, points_[static_cast<std::size_t>(id)]), id};
        if (heap.admits(c)) heap.push(c);
      }
      continue;
    }
    // push the farther child first so the nearer child is processed next
    const double qc = coord(q, node.axis);
    if (qc < node.split) {
      stack.push_back(node.right);
      stack.push_back(node.left);
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }

  std::vector<Candidate>& best = heap.finish();
  std::vector<Neighbor> result;
  result.reserve(best.size());
  for (const Candidate& c : best) {
    result.push_back(Neighbor{c.id, std::sqrt(c.d2)});
  }
  return result;
}

int SpatialIndex::count_in_radius(const Point3& q, double r, int exclude_id) const {
  if (!(r > 0.0)) throw std::invalid_argument("count_in_radius: r must be > 0");
  const double r2 = r * r;

  int count = 0;
  std::vector<std::int32_t> stack;
  stack.push_back(root_);
  while (!stack.empty()) {
    const Node& node = nodes_[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    if (squared_box_distance(q, node.bbox_min, node.bbox_max) > r2) continue;
    if (squared_box_far_distance(q, node.bbox_min, node.bbox_max) <= r2) {
      count += node.end - node.begin;  // whole subtree inside the ball
      continue;
    }
    if (node.is_leaf()) {
      for (std::int32_t i = node.begin; i < node.end; ++i) {
        const std::int32_t id = order_[static_cast<std::size_t>(i)];
        if (squared_distance(q, points_[static_cast<std::size_t>(id)]) <= r2) ++count;
      }
      continue;
    }
    stack.push_back(node.left);
    stack.push_back(node.right);
  }

  if (exclude_id >= 0 && exclude_id < static_cast<int>(points_.size()) &&
      squared_distance(q, points_[static_cast<std::size_t>(exclude_id)]) <= r2) {
    --count;
  }
  return count;
}

}  // namespace embryostage
