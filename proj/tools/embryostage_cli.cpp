// Command-line surface: reference generation, simulation, training,
// prediction, evaluation, and cross-validation.
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "embryostage/checkpoint.hpp"
#include "embryostage/csv_io.hpp"
#include "embryostage/dataset.hpp"
#include "embryostage/eval.hpp"
#include "embryostage/pointnet.hpp"
#include "embryostage/reference.hpp"
#include "embryostage/sim.hpp"
#include "embryostage/train.hpp"

namespace {

using namespace embryostage;

constexpr int kExitOk = 0;
constexpr int kExitUserError = 1;
constexpr int kExitInternalError = 2;

struct CommonOpts {
  std::uint64_t seed = 0;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--seed", opts.seed, "RNG seed controlling all randomness");
  cmd->add_option("--threads", opts.threads, "Worker threads (1 = bit-reproducible path)")
      ->check(CLI::PositiveNumber);
}

void add_train_options(CLI::App* cmd, TrainConfig& cfg, bool& no_rotation,
                       std::string& norm_mode) {
  cmd->add_option("--epochs", cfg.epochs)->check(CLI::PositiveNumber);
  cmd->add_option("--batch-size", cfg.batch_size)->check(CLI::PositiveNumber);
  cmd->add_option("--lr", cfg.learning_rate, "ADAM learning rate");
  cmd->add_flag("--lr-step-decay", cfg.lr_step_decay, "Decay lr x0.7 every 20 epochs");
  cmd->add_option("--sample-size", cfg.sample_size, "Points sampled per cloud")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--ensemble-runs", cfg.ensemble_runs)->check(CLI::PositiveNumber);
  cmd->add_flag("--no-rotation", no_rotation, "Disable rotation augmentation");
  cmd->add_option("--jitter-sigma", cfg.augment.jitter_sigma);
  cmd->add_option("--jitter-clip", cfg.augment.jitter_clip);
  cmd->add_option("--norm-mode", norm_mode, "center-only | center-fixed-scale");
  cmd->add_option("--fixed-scale", cfg.normalization.fixed_scale_um,
                  "Normalization divisor in um");
  cmd->add_option("--orth-weight", cfg.orth_weight,
                  "Feature-transform orthogonality penalty weight");
}

NormalizationMode parse_norm_mode(const std::string& mode) {
  if (mode == "center-only") return NormalizationMode::kCenterOnly;
  if (mode == "center-fixed-scale") return NormalizationMode::kCenterFixedScale;
  throw std::runtime_error("unknown --norm-mode '" + mode + "'");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

int run(int argc, char** argv) {
  CLI::App app{"Point-cloud developmental staging toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a config file");

  // gen-reference ----------------------------------------------------------
  auto* gen = app.add_subcommand("gen-reference", "Generate a procedural reference embryo");
  CommonOpts gen_common;
  add_common(gen, gen_common);
  ReferenceParams ref_params;
  std::string gen_out;
  gen->add_option("--frames", ref_params.frames)->check(CLI::PositiveNumber);
  gen->add_option("--n-start", ref_params.n_start)->check(CLI::PositiveNumber);
  gen->add_option("--n-end", ref_params.n_end)->check(CLI::PositiveNumber);
  gen->add_option("--radius", ref_params.radius_um, "Embryo radius in um");
  gen->add_option("--theta-start", ref_params.theta_start_deg, "Cap half-angle at frame 0 (deg)");
  gen->add_option("--theta-end", ref_params.theta_end_deg, "Cap half-angle at the last frame (deg)");
  gen->add_option("--shell-jitter", ref_params.shell_jitter);
  gen->add_option("--max-step", ref_params.max_step_um, "Per-frame motion bound in um");
  gen->add_option("--hpf-start", ref_params.hpf_start);
  gen->add_option("--hpf-end", ref_params.hpf_end);
  gen->add_option("-o,--out", gen_out, "Output CSV path")->required();

  // simulate ---------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "Backward-time simulation from a reference");
  CommonOpts sim_common;
  add_common(sim, sim_common);
  SimConfig sim_cfg;
  std::string sim_ref, sim_out, sim_report_path, sim_policy = "density";
  double sim_hpf_start = 4.7, sim_hpf_end = 10.0;
  sim->add_option("--ref", sim_ref, "Reference embryo CSV")->required();
  sim->add_option("-p,--fraction", sim_cfg.p, "Fraction of real object count");
  sim->add_option("--k-neighbors", sim_cfg.k_neighbors, "K for the flow average")
      ->check(CLI::PositiveNumber);
  sim->add_option("--density-radius", sim_cfg.density_radius_um, "Density sphere radius in um");
  sim->add_option("--policy", sim_policy, "density | random-delete");
  sim->add_option("--hpf-start", sim_hpf_start);
  sim->add_option("--hpf-end", sim_hpf_end);
  sim->add_option("-o,--out", sim_out, "Output CSV path")->required();
  sim->add_option("--report", sim_report_path, "Optional per-frame stats JSON");

  // train ------------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "Train on all manifest embryos except one");
  CommonOpts tr_common;
  add_common(tr, tr_common);
  TrainConfig tr_cfg;
  bool tr_no_rotation = false;
  std::string tr_norm_mode = "center-fixed-scale";
  std::string tr_manifest, tr_hold_out, tr_out, tr_curve;
  tr->add_option("--manifest", tr_manifest, "Dataset manifest JSON")->required();
  tr->add_option("--hold-out", tr_hold_out, "Embryo id to exclude from training");
  add_train_options(tr, tr_cfg, tr_no_rotation, tr_norm_mode);
  tr->add_option("-o,--out", tr_out, "Checkpoint path")->required();
  tr->add_option("--loss-curve", tr_curve, "Loss curve CSV path");

  // predict ----------------------------------------------------------------
  auto* pr = app.add_subcommand("predict", "Predict hpf for every frame of a point-cloud file");
  CommonOpts pr_common;
  add_common(pr, pr_common);
  std::string pr_model, pr_data, pr_out;
  int pr_runs = 25, pr_sample = 4096;
  pr->add_option("--model", pr_model, "Checkpoint path")->required();
  pr->add_option("--data", pr_data, "Embryo CSV")->required();
  pr->add_option("--runs", pr_runs, "Ensemble runs per frame")->check(CLI::PositiveNumber);
  pr->add_option("--sample-size", pr_sample)->check(CLI::PositiveNumber);
  pr->add_option("-o,--out", pr_out, "Write predictions here instead of stdout");

  // evaluate ---------------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "Compare predictions against stage labels");
  CommonOpts ev_common;
  add_common(ev, ev_common);
  std::string ev_model, ev_data, ev_id = "embryo", ev_out;
  double ev_hpf_start = 4.7, ev_hpf_end = 10.0;
  int ev_runs = 25, ev_sample = 4096;
  ev->add_option("--model", ev_model, "Checkpoint path")->required();
  ev->add_option("--data", ev_data, "Embryo CSV")->required();
  ev->add_option("--id", ev_id, "Embryo id used in the report");
  ev->add_option("--hpf-start", ev_hpf_start);
  ev->add_option("--hpf-end", ev_hpf_end);
  ev->add_option("--runs", ev_runs)->check(CLI::PositiveNumber);
  ev->add_option("--sample-size", ev_sample)->check(CLI::PositiveNumber);
  ev->add_option("-o,--out", ev_out, "Report JSON path (stdout otherwise)");

  // cross-validate ---------------------------------------------------------
  auto* cv = app.add_subcommand("cross-validate",
                                "Leave-one-embryo-out cross-validation over a manifest");
  CommonOpts cv_common;
  add_common(cv, cv_common);
  TrainConfig cv_cfg;
  bool cv_no_rotation = false;
  std::string cv_norm_mode = "center-fixed-scale";
  std::string cv_manifest, cv_out, cv_dir;
  cv->add_option("--manifest", cv_manifest, "Dataset manifest JSON")->required();
  add_train_options(cv, cv_cfg, cv_no_rotation, cv_norm_mode);
  cv->add_option("-o,--out", cv_out, "Report JSON path (stdout otherwise)");
  cv->add_option("--artifact-dir", cv_dir, "Directory for fold checkpoints and loss curves");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the problem and a usage hint
    return kExitUserError;
  }

  if (gen->parsed()) {
    ref_params.seed = gen_common.seed;
    const Embryo4D reference = generate_reference(ref_params);
    save_embryo_csv(reference, gen_out);
    std::cout << "wrote " << gen_out << " (" << reference.frames.size() << " frames, "
              << reference.frames.front().size() << " -> " << reference.frames.back().size()
              << " points)\n";
    return kExitOk;
  }

  if (sim->parsed()) {
    if (sim_policy == "density") {
      sim_cfg.policy = MergePolicy::kDensityDifference;
    } else if (sim_policy == "random-delete") {
      sim_cfg.policy = MergePolicy::kRandomDeletion;
    } else {
      throw std::runtime_error("unknown --policy '" + sim_policy + "'");
    }
    sim_cfg.seed = sim_common.seed;
    const Embryo4D reference = load_embryo_csv(sim_ref, sim_hpf_start, sim_hpf_end);
    SimReport report;
    const Embryo4D simulated = simulate(reference, sim_cfg, &report);
    save_embryo_csv(simulated, sim_out);
    for (const std::string& warning : report.warnings) {
      std::cerr << "warning: " << warning << "\n";
    }
    if (!sim_report_path.empty()) {
      nlohmann::json frames = nlohmann::json::array();
      for (const SimFrameStats& fs : report.frames) {
        frames.push_back({{"frame", fs.frame},
                          {"n_objects", fs.n_objects},
                          {"merges_requested", fs.merges_requested},
                          {"merges_performed", fs.merges_performed},
                          {"mean_abs_rho_diff", fs.mean_abs_rho_diff}});
      }
      const nlohmann::json j = {{"frames", std::move(frames)}, {"warnings", report.warnings}};
      write_text(sim_report_path, j.dump(2) + "\n");
    }
    std::cout << "wrote " << sim_out << " (" << simulated.frames.size() << " frames, "
              << simulated.frames.front().size() << " -> " << simulated.frames.back().size()
              << " points)\n";
    return kExitOk;
  }

  if (tr->parsed()) {
    tr_cfg.seed = tr_common.seed;
    tr_cfg.threads = tr_common.threads;
    tr_cfg.augment.rotation = !tr_no_rotation;
    tr_cfg.normalization.mode = parse_norm_mode(tr_norm_mode);
    const DatasetManifest manifest = load_manifest(tr_manifest);
    const std::vector<LabeledEmbryo> embryos = load_all_embryos(manifest);
    const TrainResult result = train(embryos, tr_hold_out, tr_cfg);
    save_checkpoint(tr_out, result.model, tr_cfg.normalization, train_config_to_json(tr_cfg));
    if (!tr_curve.empty()) save_loss_curve_csv(result.loss_curve, tr_curve);
    std::cout << "trained on";
    for (const std::string& id : result.trained_on) std::cout << ' ' << id;
    std::cout << "; final epoch loss " << result.loss_curve.back() << "\n";
    return kExitOk;
  }

  if (pr->parsed()) {
    const LoadedCheckpoint ckpt = load_checkpoint(pr_model);
    const Embryo4D data = load_embryo_csv(pr_data);
    PointNetRunner runner(ckpt.model);
    std::string lines;
    for (const Frame& frame : data.frames) {
      const EnsemblePrediction p =
          predict_ensemble(runner, frame, pr_runs, pr_sample, ckpt.normalization,
                           frame_prediction_seed(pr_common.seed, frame.index));
      lines += format_double(p.mean);
      lines += '\n';
    }
    if (pr_out.empty()) {
      std::cout << lines;
    } else {
      write_text(pr_out, lines);
    }
    return kExitOk;
  }

  if (ev->parsed()) {
    const LoadedCheckpoint ckpt = load_checkpoint(ev_model);
    LabeledEmbryo embryo;
    embryo.id = ev_id;
    embryo.data = load_embryo_csv(ev_data, ev_hpf_start, ev_hpf_end);
    const EvalReport report = evaluate(ckpt.model, ckpt.normalization, embryo, ev_runs,
                                       ev_sample, ev_common.seed, ev_common.threads);
    const std::string text = eval_report_to_json(report).dump(2) + "\n";
    if (ev_out.empty()) {
      std::cout << text;
    } else {
      write_text(ev_out, text);
      std::cout << "MAE " << report.stats.mae_h << " h, RMSD " << report.stats.rmsd_h << " h ("
                << report.stats.n_frames << " frames)\n";
    }
    return kExitOk;
  }

  if (cv->parsed()) {
    cv_cfg.seed = cv_common.seed;
    cv_cfg.threads = cv_common.threads;
    cv_cfg.augment.rotation = !cv_no_rotation;
    cv_cfg.normalization.mode = parse_norm_mode(cv_norm_mode);
    const DatasetManifest manifest = load_manifest(cv_manifest);
    const std::vector<LabeledEmbryo> embryos = load_all_embryos(manifest);
    FoldCallback on_fold;
    if (!cv_dir.empty()) {
      std::filesystem::create_directories(cv_dir);
      on_fold = [&](std::size_t fold, const TrainResult& trained, const EvalReport& rep) {
        const std::string base = cv_dir + "/fold_" + rep.embryo_id;
        save_checkpoint(base + ".ckpt", trained.model, cv_cfg.normalization,
                        train_config_to_json(cv_cfg));
        save_loss_curve_csv(trained.loss_curve, base + "_loss.csv");
        std::cout << "fold " << fold << " (" << rep.embryo_id << "): MAE "
                  << rep.stats.mae_h << " h\n";
      };
    }
    const CrossValReport report = cross_validate(embryos, cv_cfg, on_fold);
    const std::string text = cross_val_report_to_json(report).dump(2) + "\n";
    if (cv_out.empty()) {
      std::cout << text;
    } else {
      write_text(cv_out, text);
      std::cout << "pooled MAE " << report.pooled.mae_h << " h over "
                << report.pooled.n_frames << " frames\n";
    }
    return kExitOk;
  }

  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUserError;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUserError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternalError;
  }
}
