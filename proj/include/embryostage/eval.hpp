// Evaluation metrics and the leave-one-embryo-out cross-validation harness.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "embryostage/dataset.hpp"
#include "embryostage/pointnet.hpp"
#include "embryostage/train.hpp"

namespace embryostage {

struct FramePrediction {
  int frame = 0;
  double true_hpf = 0.0;
  double predicted_hpf = 0.0;
};

struct DeviationStats {
  double mae_h = 0.0;          // mean absolute deviation
  double std_abs_dev_h = 0.0;  // sample std of the absolute deviations
  double rmsd_h = 0.0;
  std::int64_t n_frames = 0;
};

/// Stats over signed deviations (pred - true).
DeviationStats compute_deviation_stats(const std::vector<double>& deviations);

struct EvalReport {
  std::string embryo_id;
  std::vector<FramePrediction> per_frame;
  DeviationStats stats;
};

/// Seed for one frame's ensemble prediction; evaluate() and the CLI predict
/// path both derive from this so equal seeds give equal predictions.
std::uint64_t frame_prediction_seed(std::uint64_t seed, int frame);

/// Ensemble-predicts every frame of the embryo and compares against
/// frame_to_hpf ground truth. Frames evaluate independently, so the result is
/// identical for any thread count.
EvalReport evaluate(const PointNetModel& model, const NormalizationSpec& normalization,
                    const LabeledEmbryo& embryo, int ensemble_runs, int sample_size,
                    std::uint64_t seed, int threads = 1);

struct CrossValReport {
  std::vector<EvalReport> folds;
  DeviationStats pooled;    // over all per-frame deviations of all folds
  DeviationStats per_fold;  // mean/std over the folds' MAEs, RMSD of fold RMSDs
};

/// Called after each fold finishes, e.g. to persist the fold's checkpoint and
/// loss curve.
using FoldCallback =
    std::function<void(std::size_t fold_index, const TrainResult&, const EvalReport&)>;

/// One fold per embryo, each held out exactly once, trained on the rest.
CrossValReport cross_validate(const std::vector<LabeledEmbryo>& embryos, const TrainConfig& cfg,
                              const FoldCallback& on_fold = {});

nlohmann::json eval_report_to_json(const EvalReport& report);
nlohmann::json cross_val_report_to_json(const CrossValReport& report);

}  // namespace embryostage
