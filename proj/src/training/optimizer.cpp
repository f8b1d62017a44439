#include "sbd/training/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sbd {

double learning_rate(const ScheduleConfig& s, std::size_t step) {
  if (step < s.warmup_steps) return s.lr * static_cast<double>(step + 1) / static_cast<double>(s.warmup_steps);
  const std::size_t span = s.total_steps > s.warmup_steps ? s.total_steps - s.warmup_steps : 1;
  const double progress = std::min(1.0, static_cast<double>(step - s.warmup_steps) / static_cast<double>(span));
  const double floor = s.lr * s.min_lr_ratio;
  return floor + 0.5 * (s.lr - floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

template <std::floating_point T>
AdamW<T>::AdamW(const ModelConfig& config, AdamWConfig cfg)
    : cfg_(cfg), m_(ModelParams<T>::zeros(config)), v_(ModelParams<T>::zeros(config)) {}

template <std::floating_point T>
double AdamW<T>::step(ModelParams<T>& params, ModelParams<T>& grads, double lr) {
  auto p = params.named();
  auto g = grads.named();
  auto m = m_.named();
  auto v = v_.named();

  double sq = 0.0;
  for (const auto& [name, t] : g) {
    for (T x : t->data()) sq += static_cast<double>(x) * static_cast<double>(x);
  }
  const double norm = std::sqrt(sq);
  const double clip = (cfg_.grad_clip > 0.0 && norm > cfg_.grad_clip) ? cfg_.grad_clip / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < p.size(); ++i) {
    Tensor<T>& w = *p[i].second;
    const Tensor<T>& gr = *g[i].second;
    Tensor<T>& mi = *m[i].second;
    Tensor<T>& vi = *v[i].second;
    const bool decay = w.rank() == 2;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = static_cast<double>(gr[j]) * clip;
      const double mj = cfg_.beta1 * static_cast<double>(mi[j]) + (1.0 - cfg_.beta1) * gj;
      const double vj = cfg_.beta2 * static_cast<double>(vi[j]) + (1.0 - cfg_.beta2) * gj * gj;
      mi[j] = static_cast<T>(mj);
      vi[j] = static_cast<T>(vj);
      double wj = static_cast<double>(w[j]);
      if (decay) wj -= lr * cfg_.weight_decay * wj;
      wj -= lr * (mj / bc1) / (std::sqrt(vj / bc2) + cfg_.eps);
      w[j] = static_cast<T>(wj);
    }
  }
  return norm;
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace sbd
