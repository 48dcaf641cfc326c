#include "embryostage/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "embryostage/rng.hpp"
#include "embryostage/spatial_index.hpp"

namespace embryostage {

namespace {

constexpr std::uint64_t kReferenceStream = 0x03;

struct CapPoint {
  double polar_fraction;  // position within the cap: polar angle = fraction * theta
  double azimuth;
  double radial_scale;    // 1 +- shell jitter, fixed per point
};

Point3 cap_position(const CapPoint& p, double theta, double radius) {
  const double alpha = p.polar_fraction * theta;
  const double r = radius * p.radial_scale;
  const double sa = std::sin(alpha);
  return Point3{r * sa * std::cos(p.azimuth), r * sa * std::sin(p.azimuth),
                r * std::cos(alpha)};
}

void check_params(const ReferenceParams& p) {
  if (p.frames < 2) throw std::invalid_argument("generate_reference: frames must be >= 2");
  if (p.n_start < 10) throw std::invalid_argument("generate_reference: n_start must be >= 10");
  if (p.n_end < p.n_start) {
    throw std::invalid_argument("generate_reference: n_end must be >= n_start");
  }
  if (!(p.radius_um > 0.0)) throw std::invalid_argument("generate_reference: radius must be > 0");
  if (!(p.theta_start_deg > 0.0 && p.theta_start_deg < p.theta_end_deg &&
        p.theta_end_deg <= 180.0)) {
    throw std::invalid_argument(
        "generate_reference: need 0 < theta_start < theta_end <= 180 degrees");
  }
  if (!(p.shell_jitter >= 0.0 && p.shell_jitter < 0.5)) {
    throw std::invalid_argument("generate_reference: shell_jitter must be in [0, 0.5)");
  }
  if (!(p.hpf_end > p.hpf_start)) {
    throw std::invalid_argument("generate_reference: hpf_end must be > hpf_start");
  }
  const double dtheta = (p.theta_end_deg - p.theta_start_deg) * std::numbers::pi / 180.0 /
                        static_cast<double>(p.frames - 1);
  const double step_bound = p.radius_um * (1.0 + p.shell_jitter) * dtheta;
  if (step_bound > p.max_step_um) {
    throw std::invalid_argument(
        "generate_reference: theta schedule would exceed max_step_um per frame");
  }
}

}  // namespace

double reference_theta(const ReferenceParams& params, int k) {
  const double start = params.theta_start_deg * std::numbers::pi / 180.0;
  const double end = params.theta_end_deg * std::numbers::pi / 180.0;
  return start + (end - start) * static_cast<double>(k) / static_cast<double>(params.frames - 1);
}

int reference_count(const ReferenceParams& params, int k) {
  if (k == 0) return params.n_start;
  if (k == params.frames - 1) return params.n_end;
  // geometric interpolation: roughly exponential growth like real counts
  const double ratio = static_cast<double>(params.n_end) / static_cast<double>(params.n_start);
  const double t = static_cast<double>(k) / static_cast<double>(params.frames - 1);
  return static_cast<int>(std::llround(params.n_start * std::pow(ratio, t)));
}

Embryo4D generate_reference(const ReferenceParams& params) {
  check_params(params);
  rng::Rng rng(rng::derive(params.seed, kReferenceStream));

  std::vector<CapPoint> points;
  points.reserve(static_cast<std::size_t>(params.n_end));
  std::vector<Point3> prev_positions;

  Embryo4D embryo;
  embryo.label_map = StageLabelMap{params.hpf_start, params.hpf_end, params.frames};
  embryo.frames.resize(static_cast<std::size_t>(params.frames));

  for (int k = 0; k < params.frames; ++k) {
    const double theta = reference_theta(params, k);

    if (k == 0) {
      // uniform-area placement on the initial cap
      const double cos_theta = std::cos(theta);
      for (int i = 0; i < params.n_start; ++i) {
        const double u = rng.uniform();
        const double alpha = std::acos(1.0 - u * (1.0 - cos_theta));
        points.push_back(CapPoint{alpha / theta, rng.uniform(0.0, 2.0 * std::numbers::pi),
                                  1.0 + rng.uniform(-params.shell_jitter, params.shell_jitter)});
      }
    }

    // positions of surviving points on the widened cap
    std::vector<Point3> positions(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      positions[i] = cap_position(points[i], theta, params.radius_um);
    }

    // grow the population by splitting the points with the largest voids
    const int births = reference_count(params, k) - static_cast<int>(points.size());
    if (births > 0) {
      const SpatialIndex index(positions);
      std::vector<std::pair<double, std::int32_t>> voids(points.size());
      for (std::size_t i = 0; i < points.size(); ++i) {
        const std::vector<Neighbor> nn = index.knn(positions[i], 1, static_cast<int>(i));
        voids[i] = {nn.empty() ? 0.0 : nn.front().dist, static_cast<std::int32_t>(i)};
      }
      std::sort(voids.begin(), voids.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });

      for (int b = 0; b < births; ++b) {
        const auto& [void_dist, parent_id] = voids[static_cast<std::size_t>(b) % voids.size()];
        const CapPoint& parent = points[static_cast<std::size_t>(parent_id)];

        // offspring direction: parent direction tilted by a small angle in a
        // random tangent direction, staying on the sphere
        const double alpha = parent.polar_fraction * theta;
        const double ux = std::sin(alpha) * std::cos(parent.azimuth);
        const double uy = std::sin(alpha) * std::sin(parent.azimuth);
        const double uz = std::cos(alpha);
        std::array<double, 3> w;
        double tx, ty, tz, tn;
        do {
          w = rng.unit_vector();
          const double dot = w[0] * ux + w[1] * uy + w[2] * uz;
          tx = w[0] - dot * ux;
          ty = w[1] - dot * uy;
          tz = w[2] - dot * uz;
          tn = std::sqrt(tx * tx + ty * ty + tz * tz);
        } while (tn < 1e-9);
        const double beta =
            std::min(0.45 * void_dist / params.radius_um, 0.2 * theta);
        const double cb = std::cos(beta), sb = std::sin(beta) / tn;
        const double vx = cb * ux + sb * tx;
        const double vy = cb * uy + sb * ty;
        const double vz = cb * uz + sb * tz;

        const double child_alpha = std::acos(std::clamp(vz, -1.0, 1.0));
        CapPoint child;
        child.polar_fraction = std::clamp(child_alpha / theta, 0.0, 1.0);
        child.azimuth = std::atan2(vy, vx);
        child.radial_scale = parent.radial_scale;
        points.push_back(child);
        positions.push_back(cap_position(child, theta, params.radius_um));
      }
    }

    Frame& frame = embryo.frames[static_cast<std::size_t>(k)];
    frame.index = k;
    frame.points = positions;
    frame.displacements.assign(positions.size(), Displacement3::absent());
    for (std::size_t i = 0; i < prev_positions.size(); ++i) {
      const Point3 d = positions[i] - prev_positions[i];
      frame.displacements[i] = Displacement3::of(d.x, d.y, d.z);
    }
    prev_positions = std::move(positions);
  }

  return embryo;
}

}  // namespace embryostage
