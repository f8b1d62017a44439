#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sbd/numerics/autograd.hpp"
#include "sbd/numerics/random.hpp"

namespace sbd {

using TokenSequence = std::vector<std::int32_t>;

// Boolean query x key visibility relation, stored densely row-major.
struct AttentionMaskSpec {
  std::size_t n_queries = 0;
  std::size_t n_keys = 0;
  std::vector<std::uint8_t> allowed;

  AttentionMaskSpec() = default;
  AttentionMaskSpec(std::size_t q, std::size_t k) : n_queries(q), n_keys(k), allowed(q * k, 0) {}

  bool operator()(std::size_t q, std::size_t k) const { return allowed[q * n_keys + k] != 0; }
  void set(std::size_t q, std::size_t k, bool v) { allowed[q * n_keys + k] = v ? 1 : 0; }
  ag::MaskView view() const { return {n_queries, n_keys, allowed.data()}; }

  // Plain PBM ("P1"), one '1' (visible) or '0' per cell, one line per query.
  std::string to_pbm() const;

  bool operator==(const AttentionMaskSpec&) const = default;
};

enum class Segment : std::uint8_t { Clean, MaskedDup };

struct LayoutSlot {
  Segment segment = Segment::Clean;
  // -1 for trailing clean tokens that belong to no block.
  std::int32_t block = -1;
  std::int32_t offset = 0;
  // Logical position (0-based) of the token this slot carries or stands for.
  std::int32_t source = 0;
};

// Physical order: clean block 0, masked duplicate of block 0, clean block 1,
// masked duplicate of block 1, ..., then the L mod k trailing clean tokens.
struct TrainingLayout {
  std::size_t seq_len = 0;
  std::size_t k = 0;
  std::size_t n_blocks = 0;
  std::vector<LayoutSlot> slots;

  std::size_t physical_length() const noexcept { return slots.size(); }
  std::vector<std::int32_t> position_ids() const;
};

struct MaskedSequence {
  TokenSequence tokens;
  std::vector<std::uint8_t> mask_flags;
  double eta = 0.0;
};

// Each position independently becomes `mask_id` with probability eta.
MaskedSequence make_masked_sequence(std::span<const std::int32_t> x, double eta, std::int32_t mask_id, Rng& rng);

TrainingLayout build_training_layout(std::size_t seq_len, std::size_t k);

AttentionMaskSpec build_training_mask(const TrainingLayout& layout);

// Clean rows are causal over the clean keys; block rows see every key.
AttentionMaskSpec build_inference_mask(std::size_t past_len, std::size_t block_len);

// The rows of build_inference_mask(cached + fresh, block_len) for the tokens
// actually forwarded when the first `cached` keys come from a KV cache.
AttentionMaskSpec inference_mask_rows(std::size_t cached, std::size_t fresh, std::size_t block_len);

// Physical input tokens: clean slots carry x, masked slots carry x-hat.
TokenSequence layout_tokens(const TrainingLayout& layout, std::span<const std::int32_t> x, const MaskedSequence& masked);

struct TrainingTargets {
  std::vector<std::int32_t> targets;
  std::vector<std::uint8_t> ntp_mask;
  std::vector<std::uint8_t> matp_mask;

  // Union of both terms, i.e. every position that carries any loss.
  std::vector<std::uint8_t> loss_mask() const;
};

TrainingTargets training_targets(const TrainingLayout& layout, std::span<const std::int32_t> x,
                                 const MaskedSequence& masked);

}  // namespace sbd
