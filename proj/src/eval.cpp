#include "embryostage/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "embryostage/rng.hpp"

namespace embryostage {

namespace {
constexpr std::uint64_t kEvalStream = 0x30;
constexpr std::uint64_t kFoldStream = 0x31;
}  // namespace

std::uint64_t frame_prediction_seed(std::uint64_t seed, int frame) {
  return rng::derive(rng::derive(seed, kEvalStream), static_cast<std::uint64_t>(frame));
}

DeviationStats compute_deviation_stats(const std::vector<double>& deviations) {
  DeviationStats stats;
  stats.n_frames = static_cast<std::int64_t>(deviations.size());
  if (deviations.empty()) return stats;

  double abs_sum = 0.0, sq_sum = 0.0;
  for (double d : deviations) {
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  const double n = static_cast<double>(deviations.size());
  stats.mae_h = abs_sum / n;
  stats.rmsd_h = std::sqrt(sq_sum / n);
  if (deviations.size() > 1) {
    double var = 0.0;
    for (double d : deviations) {
      const double centered = std::abs(d) - stats.mae_h;
      var += centered * centered;
    }
    stats.std_abs_dev_h = std::sqrt(var / (n - 1.0));
  }
  return stats;
}

EvalReport evaluate(const PointNetModel& model, const NormalizationSpec& normalization,
                    const LabeledEmbryo& embryo, int ensemble_runs, int sample_size,
                    std::uint64_t seed, int threads) {
  if (threads < 1) throw std::invalid_argument("evaluate: threads must be >= 1");
  require_valid(embryo.data, "embryo to evaluate");

  const std::size_t n_frames = embryo.data.frames.size();
  std::vector<double> predictions(n_frames, 0.0);

  // frames are independent; per-frame seeds make the result thread-invariant
  auto run_range = [&](std::size_t lo, std::size_t hi) {
    PointNetRunner runner(model);
    for (std::size_t f = lo; f < hi; ++f) {
      const EnsemblePrediction p =
          predict_ensemble(runner, embryo.data.frames[f], ensemble_runs, sample_size,
                           normalization, frame_prediction_seed(seed, static_cast<int>(f)));
      predictions[f] = p.mean;
    }
  };

  const std::size_t active = std::min<std::size_t>(static_cast<std::size_t>(threads), n_frames);
  if (active <= 1) {
    run_range(0, n_frames);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(active);
    for (std::size_t w = 0; w < active; ++w) {
      pool.emplace_back(run_range, n_frames * w / active, n_frames * (w + 1) / active);
    }
    for (std::thread& t : pool) t.join();
  }

  EvalReport report;
  report.embryo_id = embryo.id;
  report.per_frame.reserve(n_frames);
  std::vector<double> deviations(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    const double truth = frame_to_hpf(embryo.data.label_map, static_cast<int>(f));
    report.per_frame.push_back(FramePrediction{static_cast<int>(f), truth, predictions[f]});
    deviations[f] = predictions[f] - truth;
  }
  report.stats = compute_deviation_stats(deviations);
  return report;
}

CrossValReport cross_validate(const std::vector<LabeledEmbryo>& embryos, const TrainConfig& cfg,
                              const FoldCallback& on_fold) {
  if (embryos.size() < 2) {
    throw std::invalid_argument("cross_validate: need at least 2 embryos");
  }

  CrossValReport report;
  std::vector<double> pooled_deviations;
  std::vector<double> fold_maes;
  std::vector<double> fold_rmsds;

  for (std::size_t fold = 0; fold < embryos.size(); ++fold) {
    TrainConfig fold_cfg = cfg;
    fold_cfg.seed = rng::derive(cfg.seed, rng::derive(kFoldStream, fold));

    const TrainResult trained = train(embryos, embryos[fold].id, fold_cfg);
    EvalReport fold_report =
        evaluate(trained.model, cfg.normalization, embryos[fold], cfg.ensemble_runs,
                 cfg.sample_size, fold_cfg.seed, cfg.threads);
    if (on_fold) on_fold(fold, trained, fold_report);
    for (const FramePrediction& fp : fold_report.per_frame) {
      pooled_deviations.push_back(fp.predicted_hpf - fp.true_hpf);
    }
    fold_maes.push_back(fold_report.stats.mae_h);
    fold_rmsds.push_back(fold_report.stats.rmsd_h);
    report.folds.push_back(std::move(fold_report));
  }

  report.pooled = compute_deviation_stats(pooled_deviations);

  // fold-level summary: mean/std over fold MAEs, mean of fold RMSDs
  DeviationStats per_fold;
  per_fold.n_frames = static_cast<std::int64_t>(fold_maes.size());
  double mae_sum = 0.0, rmsd_sum = 0.0;
  for (std::size_t i = 0; i < fold_maes.size(); ++i) {
    mae_sum += fold_maes[i];
    rmsd_sum += fold_rmsds[i];
  }
  per_fold.mae_h = mae_sum / static_cast<double>(fold_maes.size());
  per_fold.rmsd_h = rmsd_sum / static_cast<double>(fold_rmsds.size());
  if (fold_maes.size() > 1) {
    double var = 0.0;
    for (double m : fold_maes) var += (m - per_fold.mae_h) * (m - per_fold.mae_h);
    per_fold.std_abs_dev_h = std::sqrt(var / (static_cast<double>(fold_maes.size()) - 1.0));
  }
  report.per_fold = per_fold;
  return report;
}

namespace {

nlohmann::json stats_to_json(const DeviationStats& stats) {
  return {
      {"mae_h", stats.mae_h},
      {"std_abs_dev_h", stats.std_abs_dev_h},
      {"rmsd_h", stats.rmsd_h},
      {"n_frames", stats.n_frames},
  };
}

}  // namespace

nlohmann::json eval_report_to_json(const EvalReport& report) {
  nlohmann::json per_frame = nlohmann::json::array();
  for (const FramePrediction& fp : report.per_frame) {
    per_frame.push_back({
        {"frame", fp.frame},
        {"true_hpf", fp.true_hpf},
        {"pred_hpf", fp.predicted_hpf},
    });
  }
  nlohmann::json j = stats_to_json(report.stats);
  j["embryo_id"] = report.embryo_id;
  j["per_frame"] = std::move(per_frame);
  return j;
}

nlohmann::json cross_val_report_to_json(const CrossValReport& report) {
  nlohmann::json folds = nlohmann::json::array();
  for (const EvalReport& fold : report.folds) folds.push_back(eval_report_to_json(fold));
  return {
      {"folds", std::move(folds)},
      {"aggregate_pooled", stats_to_json(report.pooled)},
      {"aggregate_per_fold", stats_to_json(report.per_fold)},
  };
}

}  // namespace embryostage
