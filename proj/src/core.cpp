#include "embryostage/core.hpp"

#include <sstream>
#include <stdexcept>

namespace embryostage {

double frame_to_hpf(const StageLabelMap& map, int i) {
  if (map.num_frames < 2) {
    throw std::invalid_argument("StageLabelMap needs at least 2 frames");
  }
  if (!(map.hpf_end > map.hpf_start)) {
    throw std::invalid_argument("StageLabelMap requires hpf_end > hpf_start");
  }
  if (i < 0 || i >= map.num_frames) {
    std::ostringstream msg;
    msg << "frame index " << i << " out of range [0, " << map.num_frames << ")";
    throw std::out_of_range(msg.str());
  }
  if (i == 0) return map.hpf_start;
  if (i == map.num_frames - 1) return map.hpf_end;
  const double span = map.hpf_end - map.hpf_start;
  return map.hpf_start + static_cast<double>(i) * span / (map.num_frames - 1);
}

ValidationReport validate_embryo(const Embryo4D& embryo) {
  ValidationReport report;
  auto fail = [&report](const std::string& msg) { report.failures.push_back(msg); };

  if (embryo.frames.empty()) {
    fail("embryo has no frames");
    return report;
  }
  for (std::size_t k = 0; k < embryo.frames.size(); ++k) {
    const Frame& frame = embryo.frames[k];
    std::ostringstream where;
    where << "frame " << k;
    if (frame.index != static_cast<int>(k)) {
      std::ostringstream msg;
      msg << where.str() << ": non-contiguous index " << frame.index;
      fail(msg.str());
    }
    if (frame.points.empty()) {
      fail(where.str() + ": empty point set");
    }
    if (frame.displacements.size() != frame.points.size()) {
      std::ostringstream msg;
      msg << where.str() << ": " << frame.displacements.size()
          << " displacements for " << frame.points.size() << " points";
      fail(msg.str());
    }
    for (std::size_t i = 0; i < frame.points.size(); ++i) {
      if (!frame.points[i].finite()) {
        std::ostringstream msg;
        msg << where.str() << ", point " << i << ": non-finite coordinate";
        fail(msg.str());
      }
    }
    for (std::size_t i = 0; i < frame.displacements.size(); ++i) {
      const Displacement3& d = frame.displacements[i];
      if (d.present && !d.finite()) {
        std::ostringstream msg;
        msg << where.str() << ", point " << i << ": non-finite displacement";
        fail(msg.str());
      }
    }
  }
  if (embryo.label_map.num_frames != static_cast<int>(embryo.frames.size())) {
    std::ostringstream msg;
    msg << "label map covers " << embryo.label_map.num_frames << " frames, embryo has "
        << embryo.frames.size();
    fail(msg.str());
  }
  if (!(embryo.label_map.hpf_end > embryo.label_map.hpf_start)) {
    fail("label map requires hpf_end > hpf_start");
  }
  return report;
}

void require_valid(const Embryo4D& embryo, const std::string& what) {
  const ValidationReport report = validate_embryo(embryo);
  if (report.ok()) return;
  std::ostringstream msg;
  msg << what << " failed validation:";
  for (const std::string& failure : report.failures) msg << "\n  " << failure;
  throw std::invalid_argument(msg.str());
}

}  // namespace embryostage
