// Training loop and cross-validation driver for the regression PointNet.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "embryostage/dataset.hpp"
#include "embryostage/pointnet.hpp"

namespace embryostage {

struct TrainConfig {
  int epochs = 40;
  int batch_size = 16;
  double learning_rate = 1e-3;
  bool lr_step_decay = false;  // x0.7 every 20 epochs when enabled
  int sample_size = 4096;
  int ensemble_runs = 25;
  AugmentConfig augment;
  NormalizationSpec normalization;
  double orth_weight = 0.001;
  std::uint64_t seed = 0;
  int threads = 1;  // 1 = bit-reproducible path
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);

struct TrainResult {
  PointNetModel model;
  std::vector<double> loss_curve;       // mean per-visit training loss per epoch
  std::vector<std::string> trained_on;  // embryo ids seen by the optimizer
};

/// Trains on every embryo except held_out_id (pass "" to train on all). Each
/// epoch visits every (embryo, frame) pair once in seeded-shuffled order with
/// a fresh point sample and augmentation per visit. Throws if the loss goes
/// non-finite or if fewer than one embryo remains to train on.
TrainResult train(const std::vector<LabeledEmbryo>& embryos, const std::string& held_out_id,
                  const TrainConfig& cfg);

/// Writes "epoch,train_loss" rows.
void save_loss_curve_csv(const std::vector<double>& curve, const std::string& path);

}  // namespace embryostage
