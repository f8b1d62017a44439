#include "sbd/masking/masking.hpp"

#include <string>

#include "sbd/errors.hpp"

namespace sbd {

std::string AttentionMaskSpec::to_pbm() const {
  std::string out = "P1\n" + std::to_string(n_keys) + " " + std::to_string(n_queries) + "\n";
  out.reserve(out.size() + n_queries * (n_keys + 1));
  for (std::size_t q = 0; q < n_queries; ++q) {
    for (std::size_t k = 0; k < n_keys; ++k) out.push_back((*this)(q, k) ? '1' : '0');
    out.push_back('\n');
  }
  return out;
}

std::vector<std::int32_t> TrainingLayout::position_ids() const {
  std::vector<std::int32_t> pos;
  pos.reserve(slots.size());
  for (const LayoutSlot& s : slots) pos.push_back(s.source);
  return pos;
}

MaskedSequence make_masked_sequence(std::span<const std::int32_t> x, double eta, std::int32_t mask_id, Rng& rng) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("masking probability must lie in [0, 1]");
  MaskedSequence m;
  m.eta = eta;
  m.tokens.assign(x.begin(), x.end());
  m.mask_flags.assign(x.size(), 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (uniform01(rng) < eta) {
      m.tokens[i] = mask_id;
      m.mask_flags[i] = 1;
    }
  }
  return m;
}

TrainingLayout build_training_layout(std::size_t seq_len, std::size_t k) {
  if (k < 2) throw ConfigError("block size must be at least 2, got " + std::to_string(k));
  if (seq_len < k) throw ConfigError("sequence length " + std::to_string(seq_len) + " shorter than block size");
  TrainingLayout layout;
  layout.seq_len = seq_len;
  layout.k = k;
  layout.n_blocks = seq_len / k;
  layout.slots.reserve(2 * layout.n_blocks * k + seq_len % k);
  for (std::size_t b = 0; b < layout.n_blocks; ++b) {
    for (Segment seg : {Segment::Clean, Segment::MaskedDup}) {
      for (std::size_t o = 0; o < k; ++o) {
        layout.slots.push_back({seg, static_cast<std::int32_t>(b), static_cast<std::int32_t>(o),
                                static_cast<std::int32_t>(b * k + o)});
      }
    }
  }
  for (std::size_t i = layout.n_blocks * k; i < seq_len; ++i) {
    layout.slots.push_back({Segment::Clean, -1, static_cast<std::int32_t>(i - layout.n_blocks * k),
                            static_cast<std::int32_t>(i)});
  }
  return layout;
}

AttentionMaskSpec build_training_mask(const TrainingLayout& layout) {
  const std::size_t n = layout.physical_length();
  AttentionMaskSpec spec(n, n);
  for (std::size_t q = 0; q < n; ++q) {
    const LayoutSlot& qs = layout.slots[q];
    for (std::size_t j = 0; j < n; ++j) {
      const LayoutSlot& ks = layout.slots[j];
      bool ok = false;
      if (qs.segment == Segment::Clean) {
        ok = ks.segment == Segment::Clean && ks.source <= qs.source;
      } else {
        const std::int32_t block_start = qs.block * static_cast<std::int32_t>(layout.k);
        ok = ks.segment == Segment::Clean ? ks.source < block_start : ks.block == qs.block;
      }
      spec.set(q, j, ok);
    }
  }
  return spec;
}

AttentionMaskSpec build_inference_mask(std::size_t past_len, std::size_t block_len) {
  return inference_mask_rows(0, past_len, block_len);
}

AttentionMaskSpec inference_mask_rows(std::size_t cached, std::size_t fresh, std::size_t block_len) {
  const std::size_t n_keys = cached + fresh + block_len;
  AttentionMaskSpec spec(fresh + block_len, n_keys);
  for (std::size_t q = 0; q < fresh; ++q) {
    for (std::size_t j = 0; j <= cached + q; ++j) spec.set(q, j, true);
  }
  for (std::size_t q = fresh; q < fresh + block_len; ++q) {
    for (std::size_t j = 0; j < n_keys; ++j) spec.set(q, j, true);
  }
  return spec;
}

TokenSequence layout_tokens(const TrainingLayout& layout, std::span<const std::int32_t> x, const MaskedSequence& masked) {
  if (x.size() != layout.seq_len || masked.tokens.size() != layout.seq_len) {
    throw ConfigError("layout_tokens: sequence lengths do not match the layout");
  }
  TokenSequence out;
  out.reserve(layout.physical_length());
  for (const LayoutSlot& s : layout.slots) {
    const auto i = static_cast<std::size_t>(s.source);
    out.push_back(s.segment == Segment::Clean ? x[i] : masked.tokens[i]);
  }
  return out;
}

std::vector<std::uint8_t> TrainingTargets::loss_mask() const {
  std::vector<std::uint8_t> m(targets.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = (ntp_mask[i] || matp_mask[i]) ? 1 : 0;
  return m;
}

TrainingTargets training_targets(const TrainingLayout& layout, std::span<const std::int32_t> x,
                                 const MaskedSequence& masked) {
  if (x.size() != layout.seq_len || masked.mask_flags.size() != layout.seq_len) {
    throw ConfigError("training_targets: sequence lengths do not match the layout");
  }
  const std::size_t n = layout.physical_length();
  TrainingTargets t;
  t.targets.assign(n, -1);
  t.ntp_mask.assign(n, 0);
  t.matp_mask.assign(n, 0);
  for (std::size_t p = 0; p < n; ++p) {
    const LayoutSlot& s = layout.slots[p];
    const auto i = static_cast<std::size_t>(s.source);
    if (s.segment == Segment::Clean) {
      if (i + 1 < layout.seq_len) {
        t.targets[p] = x[i + 1];
        t.ntp_mask[p] = 1;
      }
    } else if (masked.mask_flags[i]) {
      t.targets[p] = x[i];
      t.matp_mask[p] = 1;
    }
  }
  return t;
}

}  // namespace sbd
