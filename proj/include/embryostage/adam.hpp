// ADAM optimizer with bias-corrected moment estimates.
#pragma once

#include <cstdint>
#include <vector>

#include "embryostage/tensor.hpp"

namespace embryostage::ad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment buffers for a fixed list of parameter tensors.
class AdamState {
 public:
  AdamState(const std::vector<Tensor*>& params, AdamConfig config);

  /// One update: m and v decay toward the gradient statistics, then each
  /// parameter moves by -lr * m_hat / (sqrt(v_hat) + eps). grads must align
  /// with the params the state was built for.
  void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);

  std::int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

 private:
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t step_count_ = 0;
};

}  // namespace embryostage::ad
