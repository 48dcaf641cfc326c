// Embryo CSV format.
//
// Header: frame,id,x_um,y_um,z_um,dx_um,dy_um,dz_um
// One row per point per frame; rows grouped by ascending frame with point ids
// counting up from 0 inside each frame. Empty displacement cells mean the
// point is untracked at that frame. Floats are written with shortest
// round-trip formatting, so save -> load reproduces coordinates bit-exactly.
// UTF-8, LF line endings.
#pragma once

#include <string>

#include "embryostage/core.hpp"

namespace embryostage {

/// Parse errors carry the offending 1-based line number.
Embryo4D load_embryo_csv(const std::string& path, double hpf_start = 4.7,
                         double hpf_end = 10.0);

/// Validates before writing; refuses embryos that fail validate_embryo.
void save_embryo_csv(const Embryo4D& embryo, const std::string& path);

}  // namespace embryostage
