// Procedural "epiboly-like" reference embryo for desk-scale experiments.
//
// Points live on a spherical cap whose coverage angle widens monotonically
// over time while the point count grows from n_start to n_end by splitting
// the points with the most empty space around them. Tracks are exact: every
// surviving point's displacement is its true motion since the last frame.
#pragma once

#include <cstdint>

#include "embryostage/core.hpp"

namespace embryostage {

struct ReferenceParams {
  int frames = 370;
  int n_start = 1500;
  int n_end = 6000;
  double radius_um = 300.0;       // embryo radius
  double theta_start_deg = 25.0;  // cap half-angle at frame 0
  double theta_end_deg = 165.0;   // cap half-angle at the last frame
  double shell_jitter = 0.02;     // per-point radial offset, fraction of radius
  double max_step_um = 5.0;       // hard bound on per-frame point motion
  double hpf_start = 4.7;
  double hpf_end = 10.0;
  std::uint64_t seed = 0;
};

/// Cap half-angle schedule in radians; strictly increasing in k.
double reference_theta(const ReferenceParams& params, int k);

/// Target point count schedule; geometric interpolation, monotone
/// non-decreasing, exact at both endpoints.
int reference_count(const ReferenceParams& params, int k);

/// Generates the reference embryo. Deterministic given params.seed. Throws
/// std::invalid_argument on inconsistent parameters, including a theta
/// schedule that would violate max_step_um.
Embryo4D generate_reference(const ReferenceParams& params);

}  // namespace embryostage
