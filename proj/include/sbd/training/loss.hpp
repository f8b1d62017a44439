#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sbd/masking/masking.hpp"
#include "sbd/model/params.hpp"

namespace sbd {

enum class LossMode { SBD, NTP, SBDWithoutNTP };

std::string to_string(LossMode mode);
// Accepts "sbd", "ntp", "sbd_without_ntp_term" (case-insensitive); ConfigError otherwise.
LossMode parse_loss_mode(const std::string& text);

struct LossWeights {
  double ntp = 1.0;
  double matp = 1.0;
};

// Mean-reduced terms. `total` is the quantity whose gradient is taken, so it
// depends on the loss mode.
struct LossBreakdown {
  double ntp = 0.0;
  double matp = 0.0;
  double total = 0.0;
  std::size_t ntp_count = 0;
  std::size_t matp_count = 0;
};

// One sequence, one packed forward over the training layout. Gradients (of
// `total`) are added into `grads` when it is non-null.
template <std::floating_point T>
LossBreakdown sbd_loss(const ModelParams<T>& params, std::span<const std::int32_t> x, std::size_t k,
                       const MaskedSequence& masked, const LossWeights& w = {}, ModelParams<T>* grads = nullptr);

// Draws the masked sequence with probability eta from `rng`, then as above.
template <std::floating_point T>
LossBreakdown sbd_loss(const ModelParams<T>& params, std::span<const std::int32_t> x, std::size_t k, double eta,
                       Rng& rng, const LossWeights& w = {}, ModelParams<T>* grads = nullptr);

// Plain causal next-token loss over x; no masking involved.
template <std::floating_point T>
LossBreakdown ntp_loss(const ModelParams<T>& params, std::span<const std::int32_t> x, const LossWeights& w = {},
                       ModelParams<T>* grads = nullptr);

struct BatchOptions {
  LossMode mode = LossMode::SBD;
  LossWeights weights;
  // In the ablation mode the NTP term is still evaluated for logging unless
  // this is false, in which case it is never computed at all.
  bool log_ntp = true;
};

// Loss and gradient for a batch. Both terms are pooled means over the whole
// batch; each sequence runs on its own tape and the per-sequence gradients
// are summed in sequence order, so the result does not depend on scheduling.
// `masks` is ignored in NTP mode.
template <std::floating_point T>
LossBreakdown batch_loss(const ModelParams<T>& params, const std::vector<TokenSequence>& batch, std::size_t k,
                         const std::vector<MaskedSequence>& masks, const BatchOptions& opt, ModelParams<T>* grads);

}  // namespace sbd
