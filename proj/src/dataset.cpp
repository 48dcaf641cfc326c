#include "embryostage/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "embryostage/csv_io.hpp"

namespace embryostage {

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": bad manifest JSON: " + e.what());
  }

  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  DatasetManifest manifest;
  std::set<std::string> seen;
  for (const auto& entry : j.at("embryos")) {
    ManifestEntry e;
    e.id = entry.at("id").get<std::string>();
    if (!seen.insert(e.id).second) {
      throw std::runtime_error(path + ": duplicate embryo id '" + e.id + "'");
    }
    const std::filesystem::path p = entry.at("path").get<std::string>();
    e.path = (p.is_absolute() ? p : base / p).string();
    e.hpf_start = entry.value("hpf_start", 4.7);
    e.hpf_end = entry.value("hpf_end", 10.0);
    e.role = entry.value("role", "simulated");
    manifest.embryos.push_back(std::move(e));
  }
  if (manifest.embryos.empty()) {
    throw std::runtime_error(path + ": manifest lists no embryos");
  }
  return manifest;
}

std::vector<LabeledEmbryo> load_all_embryos(const DatasetManifest& manifest) {
  std::vector<LabeledEmbryo> embryos;
  embryos.reserve(manifest.embryos.size());
  for (const ManifestEntry& entry : manifest.embryos) {
    LabeledEmbryo e;
    e.id = entry.id;
    e.role = entry.role;
    e.data = load_embryo_csv(entry.path, entry.hpf_start, entry.hpf_end);
    embryos.push_back(std::move(e));
  }
  return embryos;
}

}  // namespace embryostage
