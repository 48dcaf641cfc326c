#include "embryostage/pointnet.hpp"

#include <cmath>
#include <stdexcept>

#include "embryostage/rng.hpp"
#include "kernels.hpp"

namespace embryostage {

namespace {

constexpr std::uint64_t kModelInitStream = 0x10;

using ad::Tensor;

/// Uniform fan-in init for hidden layers: U(-1/sqrt(in), 1/sqrt(in)).
DenseLayer make_dense(rng::Rng& rng, std::int64_t in, std::int64_t out) {
  DenseLayer layer;
  layer.weight = Tensor::uninit({in, out});
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (std::int64_t i = 0; i < layer.weight.size(); ++i) {
    layer.weight[i] = rng.uniform(-bound, bound);
  }
  layer.bias = Tensor::zeros({out});
  return layer;
}

/// T-Net / head output layers start at zero weight so the initial transform
/// is the bias, which is the identity matrix (T-Nets) or zero (head).
DenseLayer make_zero_dense(std::int64_t in, std::int64_t out, const Tensor* bias_init) {
  DenseLayer layer;
  layer.weight = Tensor::zeros({in, out});
  layer.bias = bias_init ? *bias_init : Tensor::zeros({out});
  return layer;
}

TNet make_tnet(rng::Rng& rng, int dim) {
  TNet tnet;
  tnet.dim = dim;
  tnet.mlp1 = make_dense(rng, dim, 64);
  tnet.mlp2 = make_dense(rng, 64, 128);
  tnet.mlp3 = make_dense(rng, 128, 1024);
  tnet.fc1 = make_dense(rng, 1024, 512);
  tnet.fc2 = make_dense(rng, 512, 256);
  Tensor identity_bias = Tensor::zeros({static_cast<std::int64_t>(dim) * dim});
  for (int i = 0; i < dim; ++i) identity_bias[static_cast<std::int64_t>(i) * dim + i] = 1.0;
  tnet.out = make_zero_dense(256, static_cast<std::int64_t>(dim) * dim, &identity_bias);
  return tnet;
}

void add_tnet_params(const std::string& prefix, TNet& tnet,
                     std::vector<std::pair<std::string, Tensor*>>& out) {
  auto add = [&out, &prefix](const std::string& name, DenseLayer& layer) {
    out.emplace_back(prefix + "." + name + ".weight", &layer.weight);
    out.emplace_back(prefix + "." + name + ".bias", &layer.bias);
  };
  add("mlp1", tnet.mlp1);
  add("mlp2", tnet.mlp2);
  add("mlp3", tnet.mlp3);
  add("fc1", tnet.fc1);
  add("fc2", tnet.fc2);
  add("out", tnet.out);
}

void check_cloud(const Tensor& cloud) {
  if (cloud.rank() != 2 || cloud.dim(1) != 3 || cloud.dim(0) < 1) {
    throw std::invalid_argument("point cloud must have shape [n, 3] with n >= 1");
  }
}

}  // namespace

PointNetModel init_pointnet(std::uint64_t seed) {
  rng::Rng rng(rng::derive(seed, kModelInitStream));
  PointNetModel model;
  model.input_tnet = make_tnet(rng, 3);
  model.mlp_a1 = make_dense(rng, 3, 64);
  model.mlp_a2 = make_dense(rng, 64, 64);
  model.feature_tnet = make_tnet(rng, 64);
  model.mlp_b1 = make_dense(rng, 64, 64);
  model.mlp_b2 = make_dense(rng, 64, 128);
  model.mlp_b3 = make_dense(rng, 128, 1024);
  model.head1 = make_dense(rng, 1024, 512);
  model.head2 = make_dense(rng, 512, 256);
  model.head3 = make_zero_dense(256, 1, nullptr);
  return model;
}

std::vector<std::pair<std::string, Tensor*>> named_parameters(PointNetModel& model) {
  std::vector<std::pair<std::string, Tensor*>> params;
  params.reserve(40);
  add_tnet_params("input_tnet", model.input_tnet, params);
  auto add = [&params](const std::string& name, DenseLayer& layer) {
    params.emplace_back(name + ".weight", &layer.weight);
    params.emplace_back(name + ".bias", &layer.bias);
  };
  add("mlp_a1", model.mlp_a1);
  add("mlp_a2", model.mlp_a2);
  add_tnet_params("feature_tnet", model.feature_tnet, params);
  add("mlp_b1", model.mlp_b1);
  add("mlp_b2", model.mlp_b2);
  add("mlp_b3", model.mlp_b3);
  add("head1", model.head1);
  add("head2", model.head2);
  add("head3", model.head3);
  return params;
}

std::vector<std::pair<std::string, const Tensor*>> named_parameters(const PointNetModel& model) {
  auto mutable_params = named_parameters(const_cast<PointNetModel&>(model));
  std::vector<std::pair<std::string, const Tensor*>> params;
  params.reserve(mutable_params.size());
  for (auto& [name, tensor] : mutable_params) params.emplace_back(name, tensor);
  return params;
}

// ---------------------------------------------------------------------------
// graph (training) path

namespace {

ad::Graph::NodeId dense_graph(ad::Graph& g, ad::Graph::NodeId x, const DenseLayer& layer,
                              bool with_relu) {
  ad::Graph::NodeId y = g.add_bias(g.matmul(x, g.param(&layer.weight)), g.param(&layer.bias));
  return with_relu ? g.relu(y) : y;
}

ad::Graph::NodeId tnet_graph(ad::Graph& g, const TNet& tnet, ad::Graph::NodeId rows) {
  ad::Graph::NodeId h = dense_graph(g, rows, tnet.mlp1, true);
  h = dense_graph(g, h, tnet.mlp2, true);
  h = dense_graph(g, h, tnet.mlp3, true);
  ad::Graph::NodeId pooled = g.max_over_points(h);
  pooled = dense_graph(g, pooled, tnet.fc1, true);
  pooled = dense_graph(g, pooled, tnet.fc2, true);
  const ad::Graph::NodeId out = dense_graph(g, pooled, tnet.out, false);
  return g.reshape(out, {tnet.dim, tnet.dim});
}

}  // namespace

PointNetGraphNodes pointnet_graph_forward(ad::Graph& g, const PointNetModel& model,
                                          ad::Graph::NodeId cloud) {
  check_cloud(g.value(cloud));
  const ad::Graph::NodeId t_input = tnet_graph(g, model.input_tnet, cloud);
  ad::Graph::NodeId x = g.matmul(cloud, t_input);
  x = dense_graph(g, x, model.mlp_a1, true);
  x = dense_graph(g, x, model.mlp_a2, true);
  const ad::Graph::NodeId t_feature = tnet_graph(g, model.feature_tnet, x);
  x = g.matmul(x, t_feature);
  x = dense_graph(g, x, model.mlp_b1, true);
  x = dense_graph(g, x, model.mlp_b2, true);
  x = dense_graph(g, x, model.mlp_b3, true);
  ad::Graph::NodeId global = g.max_over_points(x);
  global = dense_graph(g, global, model.head1, true);
  global = dense_graph(g, global, model.head2, true);
  const ad::Graph::NodeId prediction = dense_graph(g, global, model.head3, false);
  return {prediction, t_feature};
}

ad::Graph::NodeId pointnet_training_loss(ad::Graph& g, const PointNetModel& model,
                                         ad::Graph::NodeId cloud, double target_hpf,
                                         double orth_weight) {
  const PointNetGraphNodes nodes = pointnet_graph_forward(g, model, cloud);
  const ad::Graph::NodeId target = g.input(Tensor::full({1, 1}, target_hpf));
  ad::Graph::NodeId loss = g.mse_loss(nodes.prediction, target);
  if (orth_weight != 0.0) {
    loss = g.add(loss, g.scale(g.orth_penalty(nodes.feature_transform), orth_weight));
  }
  return loss;
}

// ---------------------------------------------------------------------------
// inference path: same kernels, reusable buffers, no tape

namespace {

/// Scratch slots used by PointNetRunner::forward.
enum ScratchSlot : std::size_t {
  kSlotA = 0,
  kSlotB,
  kSlotPooled,
  kSlotFc,
  kSlotTransform3,
  kSlotTransform64,
  kSlotFeature,
  kSlotCount,
};

Tensor& ensure_shape(Tensor& t, std::int64_t rows, std::int64_t cols) {
  if (t.rank() != 2 || t.dim(0) != rows || t.dim(1) != cols) {
    t = Tensor::uninit({rows, cols});
  }
  return t;
}

/// out = relu?(x * W + b); out must not alias x.
void dense_eval(const Tensor& x, const DenseLayer& layer, bool with_relu, Tensor& out) {
  const std::int64_t rows = x.rows();
  const std::int64_t inner = x.cols();
  const std::int64_t cols = layer.weight.cols();
  ensure_shape(out, rows, cols);
  kernels::gemm(x, layer.weight, out, rows, inner, cols);
  kernels::add_bias(out, layer.bias, out, rows, cols);
  if (with_relu) kernels::relu(out, out);
}

void tnet_eval(const TNet& tnet, const Tensor& rows, Tensor& scratch_a, Tensor& scratch_b,
               Tensor& transform) {
  dense_eval(rows, tnet.mlp1, true, scratch_a);
  dense_eval(scratch_a, tnet.mlp2, true, scratch_b);
  dense_eval(scratch_b, tnet.mlp3, true, scratch_a);
  std::vector<std::int32_t> argmax;
  ensure_shape(scratch_b, 1, 1024);
  kernels::max_over_rows(scratch_a, scratch_b, argmax, scratch_a.rows(), 1024);
  Tensor fc1, fc2;
  dense_eval(scratch_b, tnet.fc1, true, fc1);
  dense_eval(fc1, tnet.fc2, true, fc2);
  Tensor flat;
  dense_eval(fc2, tnet.out, false, flat);
  ensure_shape(transform, tnet.dim, tnet.dim);
  for (std::int64_t i = 0; i < flat.size(); ++i) transform[i] = flat[i];
}

}  // namespace

double PointNetRunner::forward(const ad::Tensor& cloud) {
  check_cloud(cloud);
  if (scratch_.size() < kSlotCount) scratch_.resize(kSlotCount);
  const std::int64_t n = cloud.dim(0);

  Tensor& a = scratch_[kSlotA];
  Tensor& b = scratch_[kSlotB];
  Tensor& t3 = scratch_[kSlotTransform3];
  Tensor& t64 = scratch_[kSlotTransform64];
  Tensor& feature = scratch_[kSlotFeature];

  tnet_eval(model_.input_tnet, cloud, a, b, t3);
  ensure_shape(feature, n, 3);
  kernels::gemm(cloud, t3, feature, n, 3, 3);
  dense_eval(feature, model_.mlp_a1, true, a);
  dense_eval(a, model_.mlp_a2, true, b);

  tnet_eval(model_.feature_tnet, b, a, feature, t64);
  ensure_shape(a, n, 64);
  kernels::gemm(b, t64, a, n, 64, 64);
  dense_eval(a, model_.mlp_b1, true, b);
  dense_eval(b, model_.mlp_b2, true, a);
  dense_eval(a, model_.mlp_b3, true, b);

  Tensor& pooled = scratch_[kSlotPooled];
  ensure_shape(pooled, 1, 1024);
  std::vector<std::int32_t> argmax;
  kernels::max_over_rows(b, pooled, argmax, n, 1024);

  Tensor& fc = scratch_[kSlotFc];
  dense_eval(pooled, model_.head1, true, fc);
  Tensor fc2, prediction;
  dense_eval(fc, model_.head2, true, fc2);
  dense_eval(fc2, model_.head3, false, prediction);
  return prediction[0];
}

ad::Tensor PointNetRunner::tnet_forward(const TNet& tnet, const ad::Tensor& rows) {
  if (rows.rank() != 2 || rows.dim(1) != tnet.dim || rows.dim(0) < 1) {
    throw std::invalid_argument("tnet_forward: input must be [n, dim] with n >= 1");
  }
  Tensor a, b, transform;
  tnet_eval(tnet, rows, a, b, transform);
  return transform;
}

double pointnet_forward(const PointNetModel& model, const ad::Tensor& cloud) {
  PointNetRunner runner(model);
  return runner.forward(cloud);
}

// ---------------------------------------------------------------------------
// sampling, normalization, augmentation, ensemble

ad::Tensor sample_points(const Frame& frame, int count, std::uint64_t seed) {
  if (frame.points.empty()) throw std::invalid_argument("sample_points: empty frame");
  if (count < 1) throw std::invalid_argument("sample_points: count must be >= 1");
  const std::size_t n = frame.points.size();
  rng::Rng rng(seed);

  Tensor cloud = Tensor::uninit({count, 3});
  auto put = [&cloud, &frame](std::int64_t row, std::size_t src) {
    const Point3& p = frame.points[src];
    cloud[row * 3 + 0] = p.x;
    cloud[row * 3 + 1] = p.y;
    cloud[row * 3 + 2] = p.z;
  };

  if (n >= static_cast<std::size_t>(count)) {
    const std::vector<std::size_t> picks =
        rng.sample_without_replacement(n, static_cast<std::size_t>(count));
    for (std::int64_t row = 0; row < count; ++row) put(row, picks[static_cast<std::size_t>(row)]);
  } else {
    for (std::int64_t row = 0; row < count; ++row) {
      put(row, static_cast<std::size_t>(
                   rng.uniform_int(0, static_cast<std::int64_t>(n) - 1)));
    }
  }
  return cloud;
}

void normalize_cloud(ad::Tensor& cloud, const NormalizationSpec& spec) {
  check_cloud(cloud);
  const std::int64_t n = cloud.dim(0);
  double cx = 0.0, cy = 0.0, cz = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    cx += cloud[i * 3 + 0];
    cy += cloud[i * 3 + 1];
    cz += cloud[i * 3 + 2];
  }
  cx /= static_cast<double>(n);
  cy /= static_cast<double>(n);
  cz /= static_cast<double>(n);
  double inv_scale = 1.0;
  if (spec.mode == NormalizationMode::kCenterFixedScale) {
    if (!(spec.fixed_scale_um > 0.0)) {
      throw std::invalid_argument("normalize_cloud: fixed_scale_um must be > 0");
    }
    inv_scale = 1.0 / spec.fixed_scale_um;
  }
  for (std::int64_t i = 0; i < n; ++i) {
    cloud[i * 3 + 0] = (cloud[i * 3 + 0] - cx) * inv_scale;
    cloud[i * 3 + 1] = (cloud[i * 3 + 1] - cy) * inv_scale;
    cloud[i * 3 + 2] = (cloud[i * 3 + 2] - cz) * inv_scale;
  }
}

void augment_cloud(ad::Tensor& cloud, const AugmentConfig& cfg, std::uint64_t seed) {
  check_cloud(cloud);
  if (cfg.jitter_sigma < 0.0 || cfg.jitter_clip < cfg.jitter_sigma) {
    throw std::invalid_argument("augment_cloud: need jitter_clip >= jitter_sigma >= 0");
  }
  rng::Rng rng(seed);
  const std::int64_t n = cloud.dim(0);

  if (cfg.rotation) {
    const std::array<double, 9> r = rng.rotation_matrix();
    for (std::int64_t i = 0; i < n; ++i) {
      const double x = cloud[i * 3 + 0], y = cloud[i * 3 + 1], z = cloud[i * 3 + 2];
      cloud[i * 3 + 0] = r[0] * x + r[1] * y + r[2] * z;
      cloud[i * 3 + 1] = r[3] * x + r[4] * y + r[5] * z;
      cloud[i * 3 + 2] = r[6] * x + r[7] * y + r[8] * z;
    }
  }
  if (cfg.jitter_sigma > 0.0) {
    for (std::int64_t i = 0; i < n * 3; ++i) {
      double offset = rng.gaussian() * cfg.jitter_sigma;
      offset = std::clamp(offset, -cfg.jitter_clip, cfg.jitter_clip);
      cloud[i] += offset;
    }
  }
}

EnsemblePrediction predict_ensemble(PointNetRunner& runner, const Frame& frame, int runs,
                                    int sample_count, const NormalizationSpec& normalization,
                                    std::uint64_t seed) {
  if (runs < 1) throw std::invalid_argument("predict_ensemble: runs must be >= 1");
  EnsemblePrediction result;
  result.runs.reserve(static_cast<std::size_t>(runs));
  for (int r = 0; r < runs; ++r) {
    Tensor cloud = sample_points(frame, sample_count, rng::derive(seed, static_cast<std::uint64_t>(r)));
    normalize_cloud(cloud, normalization);
    result.runs.push_back(runner.forward(cloud));
  }
  double acc = 0.0;
  for (double v : result.runs) acc += v;
  result.mean = acc / static_cast<double>(runs);
  return result;
}

}  // namespace embryostage
