#include "sbd/training/loss.hpp"

#include <algorithm>
#include <cctype>

#include "sbd/errors.hpp"
#include "sbd/model/transformer.hpp"
#include "sbd/numerics/autograd.hpp"

namespace sbd {

std::string to_string(LossMode mode) {
  switch (mode) {
    case LossMode::SBD: return "sbd";
    case LossMode::NTP: return "ntp";
    case LossMode::SBDWithoutNTP: return "sbd_without_ntp_term";
  }
  return "?";
}

LossMode parse_loss_mode(const std::string& text) {
  std::string s = text;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "sbd") return LossMode::SBD;
  if (s == "ntp") return LossMode::NTP;
  if (s == "sbd_without_ntp_term" || s == "sbd_without_ntp") return LossMode::SBDWithoutNTP;
  throw ConfigError("unknown loss mode '" + text + "'");
}

namespace {

struct Prepared {
  TokenSequence tokens;
  std::vector<std::int32_t> positions;
  AttentionMaskSpec mask;
  TrainingTargets targets;
};

Prepared prepare(std::span<const std::int32_t> x, std::size_t k, const MaskedSequence* masked) {
  Prepared p;
  if (!masked) {
    // Pure causal stream, built without the masking layout.
    p.tokens.assign(x.begin(), x.end());
    const std::size_t n = x.size();
    p.mask = AttentionMaskSpec(n, n);
    p.targets.targets.assign(n, -1);
    p.targets.ntp_mask.assign(n, 0);
    p.targets.matp_mask.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      p.positions.push_back(static_cast<std::int32_t>(i));
      for (std::size_t j = 0; j <= i; ++j) p.mask.set(i, j, true);
      if (i + 1 < n) {
        p.targets.targets[i] = x[i + 1];
        p.targets.ntp_mask[i] = 1;
      }
    }
    return p;
  }
  const TrainingLayout layout = build_training_layout(x.size(), k);
  p.tokens = layout_tokens(layout, x, *masked);
  p.positions = layout.position_ids();
  p.mask = build_training_mask(layout);
  p.targets = training_targets(layout, x, *masked);
  return p;
}

std::size_t count(const std::vector<std::uint8_t>& m) {
  return static_cast<std::size_t>(std::count(m.begin(), m.end(), std::uint8_t{1}));
}

}  // namespace

template <std::floating_point T>
LossBreakdown batch_loss(const ModelParams<T>& params, const std::vector<TokenSequence>& batch, std::size_t k,
                         const std::vector<MaskedSequence>& masks, const BatchOptions& opt, ModelParams<T>* grads) {
  const bool layout = opt.mode != LossMode::NTP;
  if (layout && masks.size() != batch.size()) throw ConfigError("one masked sequence per batch row required");

  std::vector<Prepared> prepared;
  prepared.reserve(batch.size());
  LossBreakdown out;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    prepared.push_back(prepare(batch[s], k, layout ? &masks[s] : nullptr));
    out.ntp_count += count(prepared.back().targets.ntp_mask);
    out.matp_count += count(prepared.back().targets.matp_mask);
  }
  // Pooled means: each sequence's sums are scaled by the batch-wide counts.
  const T ntp_scale = out.ntp_count ? static_cast<T>(1.0 / static_cast<double>(out.ntp_count)) : T{0};
  const T matp_scale = out.matp_count ? static_cast<T>(1.0 / static_cast<double>(out.matp_count)) : T{0};
  const bool want_ntp = opt.mode != LossMode::SBDWithoutNTP || opt.log_ntp;
  const bool grad_ntp = opt.mode != LossMode::SBDWithoutNTP;
  const bool grad_matp = opt.mode != LossMode::NTP;

  Tape<T> tape;
  for (const Prepared& p : prepared) {
    tape.clear();
    tape.set_grad_enabled(grads != nullptr);
    const Var logits = transformer_graph<T>(tape, params, grads, p.tokens, p.positions, p.mask);
    Var loss{};
    bool have_loss = false;
    auto accumulate = [&](Var term, double weight) {
      Var scaled = ag::scale(tape, term, static_cast<T>(weight));
      loss = have_loss ? ag::add(tape, loss, scaled) : scaled;
      have_loss = true;
    };
    if (want_ntp) {
      const Var ntp = ag::cross_entropy(tape, logits, p.targets.targets, p.targets.ntp_mask, ntp_scale);
      out.ntp += static_cast<double>(tape.value(ntp)[0]);
      if (grad_ntp) accumulate(ntp, opt.weights.ntp);
    }
    if (grad_matp) {
      const Var matp = ag::cross_entropy(tape, logits, p.targets.targets, p.targets.matp_mask, matp_scale);
      out.matp += static_cast<double>(tape.value(matp)[0]);
      accumulate(matp, opt.weights.matp);
    }
    if (grads && have_loss) tape.backward(loss);
  }
  switch (opt.mode) {
    case LossMode::SBD: out.total = opt.weights.ntp * out.ntp + opt.weights.matp * out.matp; break;
    case LossMode::NTP: out.total = opt.weights.ntp * out.ntp; break;
    case LossMode::SBDWithoutNTP: out.total = opt.weights.matp * out.matp; break;
  }
  return out;
}

template <std::floating_point T>
LossBreakdown sbd_loss(const ModelParams<T>& params, std::span<const std::int32_t> x, std::size_t k,
                       const MaskedSequence& masked, const LossWeights& w, ModelParams<T>* grads) {
  BatchOptions opt;
  opt.weights = w;
  return batch_loss<T>(params, {TokenSequence(x.begin(), x.end())}, k, {masked}, opt, grads);
}

template <std::floating_point T>
LossBreakdown sbd_loss(const ModelParams<T>& params, std::span<const std::int32_t> x, std::size_t k, double eta,
                       Rng& rng, const LossWeights& w, ModelParams<T>* grads) {
  const MaskedSequence masked = make_masked_sequence(x, eta, params.config.mask_token_id(), rng);
  return sbd_loss<T>(params, x, k, masked, w, grads);
}

template <std::floating_point T>
LossBreakdown ntp_loss(const ModelParams<T>& params, std::span<const std::int32_t> x, const LossWeights& w,
                       ModelParams<T>* grads) {
  BatchOptions opt;
  opt.mode = LossMode::NTP;
  opt.weights = w;
  return batch_loss<T>(params, {TokenSequence(x.begin(), x.end())}, 0, {}, opt, grads);
}

#define SBD_INSTANTIATE(T)                                                                                        \
  template LossBreakdown batch_loss<T>(const ModelParams<T>&, const std::vector<TokenSequence>&, std::size_t,     \
                                       const std::vector<MaskedSequence>&, const BatchOptions&, ModelParams<T>*); \
  template LossBreakdown sbd_loss<T>(const ModelParams<T>&, std::span<const std::int32_t>, std::size_t,           \
                                     const MaskedSequence&, const LossWeights&, ModelParams<T>*);                 \
  template LossBreakdown sbd_loss<T>(const ModelParams<T>&, std::span<const std::int32_t>, std::size_t, double,   \
                                     Rng&, const LossWeights&, ModelParams<T>*);                                  \
  template LossBreakdown ntp_loss<T>(const ModelParams<T>&, std::span<const std::int32_t>, const LossWeights&,    \
                                     ModelParams<T>*);

SBD_INSTANTIATE(float)
SBD_INSTANTIATE(double)

#undef SBD_INSTANTIATE

}  // namespace sbd
