// Domain types for 3D+t embryo point clouds and developmental stage labels.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace embryostage {

/// A nucleus centroid in micrometers.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

inline Point3 operator+(const Point3& a, const Point3& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}
inline Point3 operator-(const Point3& a, const Point3& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}
inline Point3 operator*(const Point3& a, double s) {
  return {a.x * s, a.y * s, a.z * s};
}
inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}
inline double distance(const Point3& a, const Point3& b) {
  return std::sqrt(squared_distance(a, b));
}

/// Forward motion of a point from the previous frame to this one, in µm per
/// frame interval. Untracked points (and every point of frame 0) carry an
/// absent displacement.
struct Displacement3 {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;
  bool present = false;

  static Displacement3 absent() { return {}; }
  static Displacement3 of(double dx, double dy, double dz) {
    return {dx, dy, dz, true};
  }
  bool finite() const {
    return std::isfinite(dx) && std::isfinite(dy) && std::isfinite(dz);
  }
};

/// One time point: centroids plus per-point displacements aligned by index.
struct Frame {
  int index = 0;
  std::vector<Point3> points;
  std::vector<Displacement3> displacements;

  std::size_t size() const { return points.size(); }
};

/// Linear frame-index -> hours-post-fertilization mapping. Frames are assumed
/// uniformly spaced between hpf_start and hpf_end.
struct StageLabelMap {
  double hpf_start = 0.0;
  double hpf_end = 0.0;
  int num_frames = 0;
};

/// Stage label of frame i. Endpoints are exact: frame 0 maps to hpf_start and
/// frame num_frames-1 maps to hpf_end.
double frame_to_hpf(const StageLabelMap& map, int i);

/// An ordered 3D+t point-cloud sequence with its stage labels.
struct Embryo4D {
  std::vector<Frame> frames;
  StageLabelMap label_map;
};

/// Outcome of validate_embryo. Empty failure list means the embryo is usable
/// by the simulator and the training pipeline.
struct ValidationReport {
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

/// Checks structural invariants: contiguous frame indices from 0, non-empty
/// frames, finite coordinates and displacements, aligned displacement arrays,
/// and a label map consistent with the frame count.
ValidationReport validate_embryo(const Embryo4D& embryo);

/// Throws std::invalid_argument listing every failure if validation fails.
void require_valid(const Embryo4D& embryo, const std::string& what);

}  // namespace embryostage
