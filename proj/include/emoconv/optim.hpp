#pragma once

#include <cstdint>
#include <vector>

#include "emoconv/nn.hpp"

namespace emoconv {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.8;
  double beta2 = 0.99;
  double eps = 1e-8;
  // Multiplied into the learning rate once per epoch.
  double lr_decay = 0.999;
};

// Adaptive moment estimation with bias correction.
class Adam {
 public:
  Adam(nn::ParamList params, AdamConfig config);

  // Applies one update from the accumulated gradients, then clears them.
  void step();
  void zero_grad();
  void decay_lr() { lr_ *= config_.lr_decay; }
  void set_lr(double lr) { lr_ = lr; }
  const AdamConfig& config() const noexcept { return config_; }

  double lr() const noexcept { return lr_; }
  std::uint64_t steps() const noexcept { return steps_; }
  const nn::ParamList& params() const noexcept { return params_; }

  // Moment buffers in parameter order, for checkpointing.
  const std::vector<Tensor>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor>& second_moments() const noexcept { return v_; }
  void restore(std::uint64_t steps, double lr, std::vector<Tensor> m, std::vector<Tensor> v);

 private:
  nn::ParamList params_;
  AdamConfig config_;
  double lr_;
  std::uint64_t steps_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace emoconv
