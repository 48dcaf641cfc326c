#include "embryostage/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "embryostage/adam.hpp"
#include "embryostage/graph.hpp"
#include "embryostage/rng.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace embryostage {

namespace {

constexpr std::uint64_t kModelStream = 0x20;
constexpr std::uint64_t kShuffleStream = 0x21;
constexpr std::uint64_t kVisitStream = 0x22;

struct Visit {
  std::int32_t embryo;
  std::int32_t frame;
};

void check_config(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (cfg.sample_size < 1) throw std::invalid_argument("TrainConfig: sample_size must be >= 1");
  if (cfg.ensemble_runs < 1) throw std::invalid_argument("TrainConfig: ensemble_runs must be >= 1");
  if (cfg.threads < 1) throw std::invalid_argument("TrainConfig: threads must be >= 1");
}

/// Large activation buffers churn once per sample; keeping big allocations on
/// the heap instead of fresh mmaps avoids refaulting the same pages.
void tune_allocator() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
    return true;
  }();
  (void)done;
#endif
}

}  // namespace

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  return {
      {"epochs", cfg.epochs},
      {"batch_size", cfg.batch_size},
      {"learning_rate", cfg.learning_rate},
      {"lr_step_decay", cfg.lr_step_decay},
      {"sample_size", cfg.sample_size},
      {"ensemble_runs", cfg.ensemble_runs},
      {"rotation", cfg.augment.rotation},
      {"jitter_sigma", cfg.augment.jitter_sigma},
      {"jitter_clip", cfg.augment.jitter_clip},
      {"orth_weight", cfg.orth_weight},
      {"seed", cfg.seed},
  };
}

TrainResult train(const std::vector<LabeledEmbryo>& embryos, const std::string& held_out_id,
                  const TrainConfig& cfg) {
  check_config(cfg);
  tune_allocator();

  std::vector<const LabeledEmbryo*> training;
  bool found_held_out = held_out_id.empty();
  for (const LabeledEmbryo& e : embryos) {
    if (e.id == held_out_id) {
      found_held_out = true;
      continue;
    }
    training.push_back(&e);
  }
  if (!found_held_out) {
    throw std::invalid_argument("train: held-out id '" + held_out_id + "' not in dataset");
  }
  if (training.empty()) {
    throw std::invalid_argument("train: no embryos left to train on");
  }

  TrainResult result;
  result.model = init_pointnet(rng::derive(cfg.seed, kModelStream));
  for (const LabeledEmbryo* e : training) result.trained_on.push_back(e->id);

  auto named = named_parameters(result.model);
  std::vector<ad::Tensor*> params;
  std::unordered_map<const ad::Tensor*, std::size_t> param_slot;
  for (auto& [name, tensor] : named) {
    param_slot.emplace(tensor, params.size());
    params.push_back(tensor);
  }

  ad::AdamConfig adam_cfg;
  adam_cfg.learning_rate = cfg.learning_rate;
  ad::AdamState adam(params, adam_cfg);

  std::vector<Visit> visits;
  for (std::size_t e = 0; e < training.size(); ++e) {
    for (std::size_t f = 0; f < training[e]->data.frames.size(); ++f) {
      visits.push_back(Visit{static_cast<std::int32_t>(e), static_cast<std::int32_t>(f)});
    }
  }

  const int workers = std::max(1, std::min(cfg.threads, cfg.batch_size));

  // per-worker gradient accumulators, reduced in worker order after each batch
  std::vector<std::vector<ad::Tensor>> worker_grads(static_cast<std::size_t>(workers));
  for (auto& grads : worker_grads) {
    grads.reserve(params.size());
    for (const ad::Tensor* p : params) grads.push_back(ad::Tensor::zeros(p->shape()));
  }
  std::vector<ad::Tensor> batch_grads;
  batch_grads.reserve(params.size());
  for (const ad::Tensor* p : params) batch_grads.push_back(ad::Tensor::zeros(p->shape()));

  const std::uint64_t visit_seed_root = rng::derive(cfg.seed, kVisitStream);
  std::uint64_t visit_counter = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.lr_step_decay && epoch > 0 && epoch % 20 == 0) {
      adam.set_learning_rate(adam.config().learning_rate * 0.7);
    }
    {
      rng::Rng shuffle_rng(rng::derive(rng::derive(cfg.seed, kShuffleStream),
                                       static_cast<std::uint64_t>(epoch)));
      shuffle_rng.shuffle(visits);
    }

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < visits.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t batch = std::min<std::size_t>(cfg.batch_size, visits.size() - start);
      std::vector<double> slot_loss(batch, 0.0);

      auto run_slots = [&](std::size_t lo, std::size_t hi, std::size_t worker) {
        std::vector<ad::Tensor>& grads = worker_grads[worker];
        for (std::size_t s = lo; s < hi; ++s) {
          const Visit visit = visits[start + s];
          const LabeledEmbryo& embryo = *training[static_cast<std::size_t>(visit.embryo)];
          const Frame& frame = embryo.data.frames[static_cast<std::size_t>(visit.frame)];
          const std::uint64_t vseed = rng::derive(visit_seed_root, visit_counter + s);

          ad::Tensor cloud = sample_points(frame, cfg.sample_size, rng::derive(vseed, 0));
          normalize_cloud(cloud, cfg.normalization);
          augment_cloud(cloud, cfg.augment, rng::derive(vseed, 1));
          const double target = frame_to_hpf(embryo.data.label_map, visit.frame);

          ad::Graph graph;
          const ad::Graph::NodeId cloud_node = graph.input(std::move(cloud));
          const ad::Graph::NodeId loss =
              pointnet_training_loss(graph, result.model, cloud_node, target, cfg.orth_weight);
          graph.backward(loss, 1.0 / static_cast<double>(batch));
          slot_loss[s] = graph.value(loss)[0];

          for (const auto& [tensor, node] : graph.param_nodes()) {
            if (!graph.has_grad(node)) continue;
            ad::Tensor& acc = grads[param_slot.at(tensor)];
            const ad::Tensor& g = graph.grad(node);
            for (std::int64_t i = 0; i < g.size(); ++i) acc[i] += g[i];
          }
        }
      };

      const std::size_t active =
          std::min<std::size_t>(static_cast<std::size_t>(workers), batch);
      if (active <= 1) {
        run_slots(0, batch, 0);
      } else {
        std::vector<std::thread> pool;
        pool.reserve(active);
        for (std::size_t w = 0; w < active; ++w) {
          const std::size_t lo = batch * w / active;
          const std::size_t hi = batch * (w + 1) / active;
          pool.emplace_back(run_slots, lo, hi, w);
        }
        for (std::thread& t : pool) t.join();
      }

      // reduce in worker order, step, clear accumulators
      for (std::size_t i = 0; i < params.size(); ++i) {
        ad::Tensor& total = batch_grads[i];
        total.fill(0.0);
        for (std::size_t w = 0; w < active; ++w) {
          const ad::Tensor& part = worker_grads[w][i];
          for (std::int64_t j = 0; j < total.size(); ++j) total[j] += part[j];
        }
      }
      for (std::size_t w = 0; w < active; ++w) {
        for (ad::Tensor& g : worker_grads[w]) g.fill(0.0);
      }

      double batch_loss = 0.0;
      for (double l : slot_loss) batch_loss += l;
      if (!std::isfinite(batch_loss)) {
        throw std::runtime_error("train: loss became non-finite at epoch " +
                                 std::to_string(epoch));
      }
      epoch_loss += batch_loss;

      std::vector<const ad::Tensor*> grad_ptrs;
      grad_ptrs.reserve(params.size());
      for (const ad::Tensor& g : batch_grads) grad_ptrs.push_back(&g);
      adam.step(params, grad_ptrs);

      visit_counter += batch;
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(visits.size()));
  }

  return result;
}

void save_loss_curve_csv(const std::vector<double>& curve, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "epoch,train_loss\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), curve[i]);
    out << i << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace embryostage
