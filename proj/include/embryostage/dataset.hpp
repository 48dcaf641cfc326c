// Dataset manifests: which embryo files make up an experiment and how their
// frames map to hpf labels.
#pragma once

#include <string>
#include <vector>

#include "embryostage/core.hpp"

namespace embryostage {

struct ManifestEntry {
  std::string id;
  std::string path;  // resolved against the manifest file's directory
  double hpf_start = 4.7;
  double hpf_end = 10.0;
  std::string role = "simulated";  // "real" | "simulated"
};

struct DatasetManifest {
  std::vector<ManifestEntry> embryos;
};

/// JSON shape: {"embryos":[{"id":..., "path":..., "hpf_start":...,
/// "hpf_end":..., "role":...}, ...]}. Enforces unique ids and non-empty list.
DatasetManifest load_manifest(const std::string& path);

struct LabeledEmbryo {
  std::string id;
  std::string role;
  Embryo4D data;
};

/// Loads and validates every embryo in the manifest.
std::vector<LabeledEmbryo> load_all_embryos(const DatasetManifest& manifest);

}  // namespace embryostage
