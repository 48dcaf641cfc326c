#include "embryostage/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "embryostage/rng.hpp"

namespace embryostage {

namespace {

// stream tags for deriving per-purpose RNG sub-seeds
constexpr std::uint64_t kInitStream = 0x01;
constexpr std::uint64_t kDeleteStream = 0x02;

void check_config(const SimConfig& cfg) {
  if (!(cfg.p > 0.0 && cfg.p <= 1.0)) {
    throw std::invalid_argument("SimConfig: p must be in (0, 1]");
  }
  if (cfg.k_neighbors < 1) {
    throw std::invalid_argument("SimConfig: k_neighbors must be >= 1");
  }
  if (!(cfg.density_radius_um > 0.0)) {
    throw std::invalid_argument("SimConfig: density_radius_um must be > 0");
  }
}

std::vector<Point3> alive_positions(const std::vector<SimObject>& objects) {
  std::vector<Point3> positions;
  positions.reserve(objects.size());
  for (const SimObject& o : objects) {
    if (o.alive) positions.push_back(o.position);
  }
  return positions;
}

}  // namespace

double rho_diff_value(int rho_sim, std::int64_t n_sim, int rho_embryo, std::int64_t n_embryo) {
  return static_cast<double>(rho_sim) / static_cast<double>(n_sim) -
         static_cast<double>(rho_embryo) / static_cast<double>(n_embryo);
}

std::vector<SimObject> init_simulation(const Embryo4D& ref, const SimConfig& cfg) {
  check_config(cfg);
  require_valid(ref, "reference embryo");
  const Frame& last = ref.frames.back();
  if (last.size() < 2) {
    throw std::invalid_argument("init_simulation: last reference frame needs >= 2 points");
  }
  const auto count = static_cast<std::int64_t>(
      std::llround(cfg.p * static_cast<double>(last.size())));
  if (count < 1) {
    throw std::invalid_argument("init_simulation: p * N rounds to zero objects");
  }

  rng::Rng rng(rng::derive(cfg.seed, kInitStream));
  const std::vector<std::size_t> picks =
      rng.sample_without_replacement(last.size(), static_cast<std::size_t>(count));
  const SpatialIndex index(last.points);

  std::vector<SimObject> objects;
  objects.reserve(picks.size());
  for (std::size_t pick : picks) {
    const Point3& source = last.points[pick];
    // nudge by at most half the distance to the nearest other real point
    const std::vector<Neighbor> nn = index.knn(source, 1, static_cast<int>(pick));
    const double max_mag = nn.empty() ? 0.0 : nn.front().dist / 2.0;
    const std::array<double, 3> dir = rng.unit_vector();
    const double mag = rng.uniform(0.0, max_mag);
    objects.push_back(SimObject{
        Point3{source.x + dir[0] * mag, source.y + dir[1] * mag, source.z + dir[2] * mag},
        true});
  }
  return objects;
}

Displacement3 flow_displacement(const Point3& pos, const Frame& ref_frame,
                                const SpatialIndex& ref_index, int k) {
  if (k < 1) throw std::invalid_argument("flow_displacement: k must be >= 1");
  const std::vector<Neighbor> neighbors = ref_index.knn(pos, k);
  double sx = 0.0, sy = 0.0, sz = 0.0;
  int present = 0;
  for (const Neighbor& n : neighbors) {
    const Displacement3& d = ref_frame.displacements[static_cast<std::size_t>(n.id)];
    if (!d.present) continue;  // incomplete track: skip and renormalize
    sx += d.dx;
    sy += d.dy;
    sz += d.dz;
    ++present;
  }
  if (present == 0) return Displacement3::absent();
  const double inv = 1.0 / static_cast<double>(present);
  return Displacement3::of(-sx * inv, -sy * inv, -sz * inv);
}

std::int64_t merge_count(std::int64_t n_sim, double p, std::int64_t n_embryo) {
  if (n_sim < 0 || n_embryo < 0) throw std::invalid_argument("merge_count: negative count");
  const auto target = static_cast<std::int64_t>(std::llround(p * static_cast<double>(n_embryo)));
  return std::max<std::int64_t>(0, n_sim - target);
}

DensityStats density_difference(const std::vector<Point3>& sim_positions,
                                const SpatialIndex& ref_index, double radius) {
  if (sim_positions.empty()) {
    throw std::invalid_argument("density_difference: empty simulated point set");
  }
  const SpatialIndex sim_index(sim_positions);
  const auto n_sim = static_cast<std::int64_t>(sim_positions.size());
  const auto n_embryo = static_cast<std::int64_t>(ref_index.size());

  DensityStats stats;
  stats.rho_sim.resize(sim_positions.size());
  stats.rho_embryo.resize(sim_positions.size());
  stats.rho_diff.resize(sim_positions.size());
  for (std::size_t i = 0; i < sim_positions.size(); ++i) {
    const int rho_sim =
        sim_index.count_in_radius(sim_positions[i], radius, static_cast<int>(i));
    const int rho_embryo = ref_index.count_in_radius(sim_positions[i], radius);
    stats.rho_sim[i] = rho_sim;
    stats.rho_embryo[i] = rho_embryo;
    stats.rho_diff[i] = rho_diff_value(rho_sim, n_sim, rho_embryo, n_embryo);
  }
  return stats;
}

DensityStats density_difference(const std::vector<Point3>& sim_positions,
                                const Frame& ref_frame, double radius) {
  const SpatialIndex ref_index(ref_frame.points);
  return density_difference(sim_positions, ref_index, radius);
}

std::int64_t select_and_merge(std::vector<SimObject>& objects, const DensityStats& stats,
                              std::int64_t n_merge, std::vector<std::int32_t>* fused_into) {
  const std::size_t n = objects.size();
  if (fused_into) fused_into->assign(n, -1);
  if (n_merge <= 0) return 0;
  if (stats.rho_diff.size() != n) {
    throw std::invalid_argument("select_and_merge: stats do not match object list");
  }

  // candidates in descending rho_diff order, ties toward the lower id
  std::vector<std::int32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&stats](std::int32_t a, std::int32_t b) {
    const double da = stats.rho_diff[static_cast<std::size_t>(a)];
    const double db = stats.rho_diff[static_cast<std::size_t>(b)];
    if (da != db) return da > db;
    return a < b;
  });

  std::vector<Point3> positions(n);
  for (std::size_t i = 0; i < n; ++i) positions[i] = objects[i].position;
  const SpatialIndex index(positions);

  // consumed objects can neither start nor join another fusion this step
  std::vector<char> consumed(n, 0);
  std::int64_t performed = 0;
  for (std::int32_t candidate : order) {
    if (performed >= n_merge) break;
    if (consumed[static_cast<std::size_t>(candidate)]) continue;
    if (!objects[static_cast<std::size_t>(candidate)].alive) continue;

    // nearest unconsumed partner; widen the query until one shows up
    std::int32_t partner = -1;
    for (int k = 2; k <= static_cast<int>(n); k *= 2) {
      const std::vector<Neighbor> nn =
          index.knn(objects[static_cast<std::size_t>(candidate)].position,
                    std::min<int>(k, static_cast<int>(n)), candidate);
      for (const Neighbor& cand : nn) {
        if (!consumed[static_cast<std::size_t>(cand.id)] &&
            objects[static_cast<std::size_t>(cand.id)].alive) {
          partner = cand.id;
          break;
        }
      }
      if (partner >= 0 || k >= static_cast<int>(n)) break;
    }
    if (partner < 0) break;  // fewer than two usable objects remain

    const Point3 a = objects[static_cast<std::size_t>(candidate)].position;
    const Point3 b = objects[static_cast<std::size_t>(partner)].position;
    objects[static_cast<std::size_t>(candidate)].position = (a + b) * 0.5;
    objects[static_cast<std::size_t>(partner)].alive = false;
    consumed[static_cast<std::size_t>(candidate)] = 1;
    consumed[static_cast<std::size_t>(partner)] = 1;
    if (fused_into) (*fused_into)[static_cast<std::size_t>(partner)] = candidate;
    ++performed;
  }
  return performed;
}

Embryo4D simulate(const Embryo4D& ref, const SimConfig& cfg, SimReport* report) {
  check_config(cfg);
  require_valid(ref, "reference embryo");

  const int last = static_cast<int>(ref.frames.size()) - 1;
  std::vector<SimObject> objects = init_simulation(ref, cfg);

  Embryo4D out;
  out.label_map = ref.label_map;
  out.frames.resize(ref.frames.size());
  if (report) {
    report->frames.clear();
    report->warnings.clear();
    report->frames.resize(ref.frames.size());
  }

  auto record_frame = [&out](int k, const std::vector<SimObject>& objs) {
    Frame& frame = out.frames[static_cast<std::size_t>(k)];
    frame.index = k;
    frame.points = alive_positions(objs);
    frame.displacements.assign(frame.points.size(), Displacement3::absent());
  };
  record_frame(last, objects);

  SpatialIndex ref_index(ref.frames[static_cast<std::size_t>(last)].points);

  if (report) {
    const DensityStats init_stats =
        density_difference(alive_positions(objects), ref_index, cfg.density_radius_um);
    double acc = 0.0;
    for (double d : init_stats.rho_diff) acc += std::abs(d);
    SimFrameStats& fs = report->frames[static_cast<std::size_t>(last)];
    fs.frame = last;
    fs.n_objects = static_cast<std::int64_t>(init_stats.rho_diff.size());
    fs.mean_abs_rho_diff = acc / static_cast<double>(init_stats.rho_diff.size());
  }

  for (int k = last; k >= 1; --k) {
    const Frame& frame_k = ref.frames[static_cast<std::size_t>(k)];
    const Frame& frame_prev = ref.frames[static_cast<std::size_t>(k - 1)];

    // advect every object along the averaged backward flow of frame k
    for (SimObject& obj : objects) {
      if (!obj.alive) continue;
      const Displacement3 flow =
          flow_displacement(obj.position, frame_k, ref_index, cfg.k_neighbors);
      if (flow.present) {
        obj.position.x += flow.dx;
        obj.position.y += flow.dy;
        obj.position.z += flow.dz;
      }
    }

    const auto n_sim = static_cast<std::int64_t>(objects.size());
    const SpatialIndex prev_index(frame_prev.points);
    const std::int64_t wanted =
        merge_count(n_sim, cfg.p, static_cast<std::int64_t>(frame_prev.size()));

    std::int64_t performed = 0;
    std::vector<std::int32_t> fused_into(objects.size(), -1);
    if (wanted > 0) {
      if (cfg.policy == MergePolicy::kDensityDifference) {
        const DensityStats stats =
            density_difference(alive_positions(objects), prev_index, cfg.density_radius_um);
        performed = select_and_merge(objects, stats, wanted, &fused_into);
      } else {
        // baseline: delete random objects instead of density-guided fusion
        rng::Rng rng(rng::derive(rng::derive(cfg.seed, kDeleteStream),
                                 static_cast<std::uint64_t>(k)));
        const std::int64_t feasible = std::min<std::int64_t>(wanted, n_sim - 1);
        const std::vector<std::size_t> doomed = rng.sample_without_replacement(
            objects.size(), static_cast<std::size_t>(feasible));
        for (std::size_t idx : doomed) objects[idx].alive = false;
        performed = feasible;
      }
      if (performed < wanted) {
        std::ostringstream msg;
        msg << "frame " << (k - 1) << ": requested " << wanted << " merges, performed "
            << performed;
        if (report) report->warnings.push_back(msg.str());
      }
    }

    // forward tracks for frame k: each frame-k point's successor at k-1 is
    // its advected position, or the fused midpoint if it merged; randomly
    // deleted objects leave no track
    {
      Frame& recorded_k = out.frames[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < recorded_k.points.size(); ++i) {
        const SimObject& obj = objects[i];
        Point3 succ;
        if (obj.alive) {
          succ = obj.position;
        } else if (fused_into[i] >= 0) {
          succ = objects[static_cast<std::size_t>(fused_into[i])].position;
        } else {
          continue;  // deleted: displacement stays absent
        }
        const Point3 d = recorded_k.points[i] - succ;
        recorded_k.displacements[i] = Displacement3::of(d.x, d.y, d.z);
      }
    }

    std::erase_if(objects, [](const SimObject& o) { return !o.alive; });
    record_frame(k - 1, objects);

    if (report) {
      SimFrameStats& fs = report->frames[static_cast<std::size_t>(k - 1)];
      fs.frame = k - 1;
      fs.n_objects = static_cast<std::int64_t>(objects.size());
      fs.merges_requested = wanted;
      fs.merges_performed = performed;
      const DensityStats post =
          density_difference(alive_positions(objects), prev_index, cfg.density_radius_um);
      double acc = 0.0;
      for (double d : post.rho_diff) acc += std::abs(d);
      fs.mean_abs_rho_diff = acc / static_cast<double>(post.rho_diff.size());
    }

    ref_index = SpatialIndex(frame_prev.points);
  }

  return out;
}

}  // namespace embryostage
