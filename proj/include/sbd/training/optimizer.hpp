#pragma once

#include <concepts>
#include <cstddef>

#include "sbd/model/params.hpp"

namespace sbd {

struct ScheduleConfig {
  double lr = 3e-4;
  std::size_t warmup_steps = 200;
  // Cosine decays from lr to lr * min_lr_ratio over the post-warmup steps.
  double min_lr_ratio = 0.1;
  std::size_t total_steps = 1000;
};

// Linear warmup then cosine decay. `step` is zero-based.
double learning_rate(const ScheduleConfig& s, std::size_t step);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  // Decoupled decay, applied to matrices only (norm gains are left alone).
  double weight_decay = 0.01;
  // Global-norm clip; <= 0 disables.
  double grad_clip = 1.0;
};

template <std::floating_point T>
class AdamW {
 public:
  AdamW(const ModelConfig& config, AdamWConfig cfg);

  // Applies one update in place and returns the gradient norm measured
  // before clipping.
  double step(ModelParams<T>& params, ModelParams<T>& grads, double lr);

  std::size_t steps_taken() const noexcept { return t_; }

 private:
  AdamWConfig cfg_;
  ModelParams<T> m_;
  ModelParams<T> v_;
  std::size_t t_ = 0;
};

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace sbd
