// Regression PointNet: per-point shared MLPs with input/feature transform
// networks, channel-wise max pooling, and a fully connected head ending in a
// single linear output neuron that predicts the stage in hpf.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "embryostage/core.hpp"
#include "embryostage/graph.hpp"
#include "embryostage/tensor.hpp"

namespace embryostage {

struct DenseLayer {
  ad::Tensor weight;  // [in, out]
  ad::Tensor bias;    // [out]
};

/// Transform network predicting a square dim x dim matrix from a point/feature
/// set: shared per-point MLP (64, 128, 1024), max pool, FC (512, 256), then a
/// final layer whose weights start at zero with an identity bias so the
/// transform is exactly the identity at initialization.
struct TNet {
  int dim = 3;
  DenseLayer mlp1, mlp2, mlp3;
  DenseLayer fc1, fc2;
  DenseLayer out;
};

struct PointNetModel {
  TNet input_tnet;    // 3x3
  TNet feature_tnet;  // 64x64
  DenseLayer mlp_a1, mlp_a2;          // 3 -> 64 -> 64
  DenseLayer mlp_b1, mlp_b2, mlp_b3;  // 64 -> 64 -> 128 -> 1024
  DenseLayer head1, head2, head3;     // 1024 -> 512 -> 256 -> 1, last linear
};

/// Fresh model: hidden layers uniform fan-in init, T-Net output layers and the
/// regression head's final layer start at zero weight (identity / zero bias),
/// so a new model returns the identity transform and predicts exactly 0.
PointNetModel init_pointnet(std::uint64_t seed);

/// Parameters in canonical (checkpoint) order.
std::vector<std::pair<std::string, ad::Tensor*>> named_parameters(PointNetModel& model);
std::vector<std::pair<std::string, const ad::Tensor*>> named_parameters(const PointNetModel& model);

struct AugmentConfig {
  bool rotation = true;        // uniform random 3D rotation about the origin
  double jitter_sigma = 0.002; // Gaussian std per coordinate, normalized units
  double jitter_clip = 0.01;   // absolute clip bound on each jitter component
};

enum class NormalizationMode {
  kCenterOnly,
  kCenterFixedScale,
};

struct NormalizationSpec {
  NormalizationMode mode = NormalizationMode::kCenterFixedScale;
  double fixed_scale_um = 350.0;
};

/// Draws `count` points from the frame: without replacement when the frame
/// has at least `count` points, with replacement otherwise. Returns an
/// [count, 3] cloud. Deterministic per seed.
ad::Tensor sample_points(const Frame& frame, int count, std::uint64_t seed);

/// Subtracts the cloud centroid and optionally divides by the fixed scale.
void normalize_cloud(ad::Tensor& cloud, const NormalizationSpec& spec);

/// One uniform random rotation applied to all rows, then clipped Gaussian
/// jitter per coordinate. Expects a normalized cloud.
void augment_cloud(ad::Tensor& cloud, const AugmentConfig& cfg, std::uint64_t seed);

/// Graph forward pass; returns the prediction node (scalar [1,1]) and the
/// feature transform node [64,64] for the orthogonality penalty.
struct PointNetGraphNodes {
  ad::Graph::NodeId prediction;
  ad::Graph::NodeId feature_transform;
};
PointNetGraphNodes pointnet_graph_forward(ad::Graph& graph, const PointNetModel& model,
                                          ad::Graph::NodeId cloud);

/// mse(prediction, target) + orth_weight * ||I - T T^T||_F^2 on the feature
/// transform (orth_weight 0 disables the penalty term entirely).
ad::Graph::NodeId pointnet_training_loss(ad::Graph& graph, const PointNetModel& model,
                                         ad::Graph::NodeId cloud, double target_hpf,
                                         double orth_weight);

/// Inference-path forward with reusable scratch buffers; numerically identical
/// to the graph path (both run the same kernels). Safe to use one runner per
/// thread against a shared immutable model.
class PointNetRunner {
 public:
  explicit PointNetRunner(const PointNetModel& model) : model_(model) {}

  /// cloud [n,3] (already normalized) -> predicted hpf.
  double forward(const ad::Tensor& cloud);

  /// Standalone transform evaluation: [n, dim] rows -> [dim, dim] matrix.
  static ad::Tensor tnet_forward(const TNet& tnet, const ad::Tensor& rows);

 private:
  const PointNetModel& model_;
  std::vector<ad::Tensor> scratch_;
};

/// Convenience single-shot forward.
double pointnet_forward(const PointNetModel& model, const ad::Tensor& cloud);

struct EnsemblePrediction {
  double mean = 0.0;
  std::vector<double> runs;
};

/// Mean over `runs` forward passes, each on an independent point sample of
/// the frame (no augmentation at inference). Deterministic per seed.
EnsemblePrediction predict_ensemble(PointNetRunner& runner, const Frame& frame, int runs,
                                    int sample_count, const NormalizationSpec& normalization,
                                    std::uint64_t seed);

}  // namespace embryostage
