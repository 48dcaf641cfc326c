// Backward-time synthesis of simulated embryos from a reference embryo.
//
// The simulation starts at the last frame with a fraction p of the real
// positions, advects every object along the averaged backward motion of its
// nearest real neighbors, and replaces cell divisions with merge events so
// that per-frame object counts track p times the real counts.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "embryostage/core.hpp"
#include "embryostage/spatial_index.hpp"

namespace embryostage {

enum class MergePolicy {
  kDensityDifference,  // fuse objects with maximum relative density difference
  kRandomDeletion,     // baseline: delete random objects instead of fusing
};

struct SimConfig {
  double p = 0.75;                 // fraction of real object count to simulate
  int k_neighbors = 5;             // K in the flow average
  double density_radius_um = 50.0; // sphere radius for neighbor counting
  std::uint64_t seed = 0;
  MergePolicy policy = MergePolicy::kDensityDifference;
};

struct SimObject {
  Point3 position;
  bool alive = true;
};

/// Per-object densities at one frame: raw neighbor counts for the simulated
/// and the real cloud plus the normalized difference that drives merging.
struct DensityStats {
  std::vector<int> rho_sim;
  std::vector<int> rho_embryo;
  std::vector<double> rho_diff;
};

/// rho_sim/n_sim - rho_embryo/n_embryo.
double rho_diff_value(int rho_sim, std::int64_t n_sim, int rho_embryo, std::int64_t n_embryo);

struct SimFrameStats {
  int frame = 0;
  std::int64_t n_objects = 0;
  std::int64_t merges_requested = 0;
  std::int64_t merges_performed = 0;
  double mean_abs_rho_diff = 0.0;  // over objects, after the merge step
};

struct SimReport {
  std::vector<SimFrameStats> frames;  // ordered forward in time
  std::vector<std::string> warnings;
};

/// Objects at the last frame: round(p * N) distinct sampled real positions,
/// each nudged in a uniformly random direction by at most half the distance
/// to its nearest real neighbor. Deterministic given cfg.seed.
std::vector<SimObject> init_simulation(const Embryo4D& ref, const SimConfig& cfg);

/// Average backward direction of the K reference points nearest to pos
/// (Eq. flow average). Neighbors with absent displacement are skipped and the
/// average renormalized; if none of the K carries a displacement the result
/// is absent (callers treat that as zero motion).
Displacement3 flow_displacement(const Point3& pos, const Frame& ref_frame,
                                const SpatialIndex& ref_index, int k);

/// Merges required to bring n_sim down to round(p * n_embryo).
std::int64_t merge_count(std::int64_t n_sim, double p, std::int64_t n_embryo);

/// Densities of every simulated position against its own cloud (self
/// excluded) and the reference cloud, normalized by the respective totals.
DensityStats density_difference(const std::vector<Point3>& sim_positions,
                                const SpatialIndex& ref_index, double radius);

/// Convenience overload building the reference index internally.
DensityStats density_difference(const std::vector<Point3>& sim_positions,
                                const Frame& ref_frame, double radius);

/// Fuses n_merge pairs: candidates in descending rho_diff order (ties toward
/// the lower object id), each fused with its nearest unconsumed neighbor at
/// the pair midpoint. The fused object takes the candidate's slot and the
/// partner dies; neither can fuse again within the same step. Returns the
/// number of fusions performed, which is less than n_merge only when
/// candidates run out. fused_into, when given, is resized to objects.size()
/// and maps each dead partner to the slot holding its fused object (-1
/// elsewhere).
std::int64_t select_and_merge(std::vector<SimObject>& objects, const DensityStats& stats,
                              std::int64_t n_merge,
                              std::vector<std::int32_t>* fused_into = nullptr);

/// Full backward pass over the reference. The returned embryo is ordered
/// forward in time, carries the reference's stage labels, and has complete
/// forward tracks (frame-k displacements reconstruct each point's motion
/// since frame k-1; merged pairs both point back to the fused object).
Embryo4D simulate(const Embryo4D& ref, const SimConfig& cfg, SimReport* report = nullptr);

}  // namespace embryostage
