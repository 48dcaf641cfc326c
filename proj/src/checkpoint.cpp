#include "embryostage/checkpoint.hpp"

#include <bit>
#include <filesystem>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian; byte swapping is not implemented");

namespace embryostage {

namespace {

std::string weights_path_for(const std::string& manifest_path) {
  return manifest_path + ".bin";
}

}  // namespace

nlohmann::json normalization_to_json(const NormalizationSpec& spec) {
  return {
      {"mode", spec.mode == NormalizationMode::kCenterOnly ? "center-only" : "center-fixed-scale"},
      {"fixed_scale_um", spec.fixed_scale_um},
  };
}

NormalizationSpec normalization_from_json(const nlohmann::json& j) {
  NormalizationSpec spec;
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "center-only") {
    spec.mode = NormalizationMode::kCenterOnly;
  } else if (mode == "center-fixed-scale") {
    spec.mode = NormalizationMode::kCenterFixedScale;
  } else {
    throw std::runtime_error("unknown normalization mode '" + mode + "'");
  }
  spec.fixed_scale_um = j.at("fixed_scale_um").get<double>();
  return spec;
}

void save_checkpoint(const std::string& path, const PointNetModel& model,
                     const NormalizationSpec& normalization,
                     const nlohmann::json& train_config) {
  const auto params = named_parameters(model);

  nlohmann::json layers = nlohmann::json::array();
  for (const auto& [name, tensor] : params) {
    layers.push_back({{"name", name}, {"shape", tensor->shape()}});
  }
  const std::string weights_file =
      std::filesystem::path(weights_path_for(path)).filename().string();
  const nlohmann::json manifest = {
      {"format_version", kCheckpointFormatVersion},
      {"dtype", "float64"},
      {"byte_order", "little"},
      {"weights_file", weights_file},
      {"layers", layers},
      {"normalization", normalization_to_json(normalization)},
      {"train_config", train_config},
  };

  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << manifest.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed for " + path);
  }
  {
    std::ofstream out(weights_path_for(path), std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + weights_path_for(path));
    for (const auto& [name, tensor] : params) {
      out.write(reinterpret_cast<const char*>(tensor->data()),
                static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(tensor->size())));
    }
    if (!out) throw std::runtime_error("write failed for " + weights_path_for(path));
  }
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": bad checkpoint manifest: " + e.what());
  }

  const int version = manifest.at("format_version").get<int>();
  if (version != kCheckpointFormatVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint format version " +
                             std::to_string(version));
  }

  LoadedCheckpoint loaded;
  loaded.manifest = manifest;
  loaded.model = init_pointnet(0);
  loaded.normalization = normalization_from_json(manifest.at("normalization"));

  const auto params = named_parameters(loaded.model);
  const auto& layers = manifest.at("layers");
  if (layers.size() != params.size()) {
    throw std::runtime_error(path + ": layer count does not match this model");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& layer = layers[i];
    if (layer.at("name").get<std::string>() != params[i].first) {
      throw std::runtime_error(path + ": unexpected layer '" +
                               layer.at("name").get<std::string>() + "' (want '" +
                               params[i].first + "')");
    }
    const auto shape = layer.at("shape").get<std::vector<std::int64_t>>();
    if (shape != params[i].second->shape()) {
      throw std::runtime_error(path + ": shape mismatch for layer '" + params[i].first + "'");
    }
  }

  const std::string blob_path =
      (std::filesystem::path(path).parent_path() /
       manifest.at("weights_file").get<std::string>())
          .string();
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw std::runtime_error("cannot open " + blob_path);
  for (const auto& [name, tensor] : params) {
    blob.read(reinterpret_cast<char*>(tensor->data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(tensor->size())));
    if (!blob) throw std::runtime_error(blob_path + ": truncated weights blob at layer " + name);
  }
  char extra;
  if (blob.read(&extra, 1)) {
    throw std::runtime_error(blob_path + ": trailing bytes after the last layer");
  }
  return loaded;
}

}  // namespace embryostage
