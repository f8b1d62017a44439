#include <doctest.h>

#include <string>

#include "sbd/errors.hpp"
#include "sbd/masking/masking.hpp"
#include "mask_reference.hpp"

using namespace sbd;

namespace {

TokenSequence iota_tokens(std::size_t n) {
  TokenSequence x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<std::int32_t>(100 + i);
  return x;
}

std::size_t slot_of(const TrainingLayout& l, Segment seg, std::int32_t source) {
  for (std::size_t p = 0; p < l.slots.size(); ++p) {
    if (l.slots[p].segment == seg && l.slots[p].source == source) return p;
  }
  FAIL("slot not found");
  return 0;
}

}  // namespace

TEST_CASE("training layout sizes") {
  const TrainingLayout a = build_training_layout(8, 4);
  CHECK(a.n_blocks == 2);
  CHECK(a.physical_length() == 16);
  const TrainingLayout b = build_training_layout(9, 4);
  CHECK(b.n_blocks == 2);
  CHECK(b.physical_length() == 17);
  std::size_t clean = 0;
  for (const auto& s : b.slots) clean += s.segment == Segment::Clean;
  CHECK(clean == 9);
  CHECK(build_training_layout(4, 4).physical_length() == 8);
  CHECK_THROWS_AS(build_training_layout(8, 1), ConfigError);
  CHECK_THROWS_AS(build_training_layout(3, 4), ConfigError);
}

TEST_CASE("masked duplicates reuse the source positions") {
  const TrainingLayout l = build_training_layout(10, 3);
  const auto pos = l.position_ids();
  for (std::size_t p = 0; p < l.slots.size(); ++p) CHECK(pos[p] == l.slots[p].source);
  CHECK(pos == std::vector<std::int32_t>{0, 1, 2, 0, 1, 2, 3, 4, 5, 3, 4, 5, 6, 7, 8, 6, 7, 8, 9});
}

TEST_CASE("training mask cells for L=8, k=4") {
  const TrainingLayout l = build_training_layout(8, 4);
  const AttentionMaskSpec m = build_training_mask(l);
  // Masked stand-in for the fifth token (source 4, block 1).
  const std::size_t q = slot_of(l, Segment::MaskedDup, 4);
  for (std::int32_t s = 0; s < 4; ++s) CHECK(m(q, slot_of(l, Segment::Clean, s)));
  for (std::int32_t s = 4; s < 8; ++s) {
    CHECK(m(q, slot_of(l, Segment::MaskedDup, s)));
    CHECK_FALSE(m(q, slot_of(l, Segment::Clean, s)));
  }
  for (std::int32_t s = 0; s < 4; ++s) CHECK_FALSE(m(q, slot_of(l, Segment::MaskedDup, s)));

  const std::size_t c = slot_of(l, Segment::Clean, 4);
  for (std::int32_t s = 0; s < 8; ++s) {
    CHECK(m(c, slot_of(l, Segment::Clean, s)) == (s <= 4));
    CHECK_FALSE(m(c, slot_of(l, Segment::MaskedDup, s)));
  }

  for (std::int32_t src = 0; src < 4; ++src) {
    const std::size_t q0 = slot_of(l, Segment::MaskedDup, src);
    for (std::int32_t s = 0; s < 8; ++s) CHECK_FALSE(m(q0, slot_of(l, Segment::Clean, s)));
    for (std::int32_t s = 0; s < 4; ++s) CHECK(m(q0, slot_of(l, Segment::MaskedDup, s)));
  }
}

TEST_CASE("training mask equals the cell-by-cell reference") {
  for (std::size_t k = 2; k <= 16; ++k) {
    for (std::size_t L = k; L <= 64; ++L) {
      const AttentionMaskSpec got = build_training_mask(build_training_layout(L, k));
      CHECK(got.allowed == reference_training_mask(L, k));
    }
  }
}

TEST_CASE("no leakage from a block's own or later clean tokens") {
  for (std::size_t k : {2u, 3u, 5u}) {
    for (std::size_t L : {k, 2 * k + 1, std::size_t{23}}) {
      if (L < k) continue;
      const TrainingLayout l = build_training_layout(L, k);
      const AttentionMaskSpec m = build_training_mask(l);
      for (std::size_t q = 0; q < l.slots.size(); ++q) {
        if (l.slots[q].segment != Segment::MaskedDup) continue;
        const std::int32_t t = l.slots[q].block * static_cast<std::int32_t>(k);
        for (std::size_t j = 0; j < l.slots.size(); ++j) {
          if (!m(q, j)) continue;
          // A visible clean key must predate the block; a visible masked key
          // is from the same block and carries either m or its own token,
          // which the query's block already holds.
          if (l.slots[j].segment == Segment::Clean) CHECK(l.slots[j].source < t);
          else CHECK(l.slots[j].block == l.slots[q].block);
        }
      }
    }
  }
}

TEST_CASE("clean restriction of the training mask is causal") {
  const TrainingLayout l = build_training_layout(13, 4);
  const AttentionMaskSpec m = build_training_mask(l);
  std::vector<std::size_t> clean;
  for (std::size_t p = 0; p < l.slots.size(); ++p) {
    if (l.slots[p].segment == Segment::Clean) clean.push_back(p);
  }
  REQUIRE(clean.size() == 13);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    for (std::size_t j = 0; j < clean.size(); ++j) CHECK(m(clean[i], clean[j]) == (j <= i));
  }
}

TEST_CASE("inference mask") {
  const AttentionMaskSpec m = build_inference_mask(3, 2);
  CHECK(m.n_queries == 5);
  CHECK(m.n_keys == 5);
  for (std::size_t q = 3; q < 5; ++q) {
    for (std::size_t k = 0; k < 5; ++k) CHECK(m(q, k));
  }
  const AttentionMaskSpec causal = build_inference_mask(4, 0);
  for (std::size_t q = 0; q < 4; ++q) {
    for (std::size_t k = 0; k < 4; ++k) CHECK(causal(q, k) == (k <= q));
  }
  for (std::size_t p : {1u, 5u}) {
    for (std::size_t b : {1u, 3u}) {
      const AttentionMaskSpec full = build_inference_mask(p, b);
      for (std::size_t q = 0; q < p; ++q) {
        for (std::size_t k = 0; k < p + b; ++k) CHECK(full(q, k) == (k <= q));
      }
    }
  }
  // Cached rows are the bottom rows of the full mask.
  const AttentionMaskSpec full = build_inference_mask(6, 3);
  const AttentionMaskSpec rows = inference_mask_rows(4, 2, 3);
  REQUIRE(rows.n_keys == 9);
  for (std::size_t q = 0; q < 5; ++q) {
    for (std::size_t k = 0; k < 9; ++k) CHECK(rows(q, k) == full(q + 4, k));
  }
}

TEST_CASE("PBM dump") {
  const std::string pbm = build_inference_mask(2, 1).to_pbm();
  CHECK(pbm == "P1\n3 3\n100\n110\n111\n");
}

TEST_CASE("make_masked_sequence") {
  const TokenSequence x = iota_tokens(10000);
  Rng r0(1), r1(1), r2(1);
  const MaskedSequence none = make_masked_sequence(x, 0.0, 7, r0);
  CHECK(none.tokens == x);
  const MaskedSequence all = make_masked_sequence(x, 1.0, 7, r1);
  for (auto t : all.tokens) CHECK(t == 7);

  const MaskedSequence half = make_masked_sequence(x, 0.5, 7, r2);
  std::size_t masked = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK((half.tokens[i] == 7) == (half.mask_flags[i] != 0));
    if (!half.mask_flags[i]) CHECK(half.tokens[i] == x[i]);
    masked += half.mask_flags[i];
  }
  // 3 sigma of Binomial(10000, 0.5) is 150.
  CHECK(masked >= 4700);
  CHECK(masked <= 5300);

  Rng a(42), b(42);
  CHECK(make_masked_sequence(x, 0.3, 7, a).tokens == make_masked_sequence(x, 0.3, 7, b).tokens);
  CHECK_THROWS_AS(make_masked_sequence(x, 1.5, 7, a), ConfigError);
}

TEST_CASE("training targets") {
  const TokenSequence x = iota_tokens(8);
  const TrainingLayout l = build_training_layout(8, 4);
  MaskedSequence ms;
  ms.tokens = x;
  ms.mask_flags.assign(8, 0);
  // Block 0 as (x1, m, x3, m); block 1 fully masked.
  for (std::size_t i : {1u, 3u, 4u, 5u, 6u, 7u}) {
    ms.tokens[i] = 99;
    ms.mask_flags[i] = 1;
  }
  const TrainingTargets t = training_targets(l, x, ms);
  const TokenSequence in = layout_tokens(l, x, ms);

  for (std::int32_t s = 0; s < 4; ++s) {
    const std::size_t p = slot_of(l, Segment::MaskedDup, s);
    CHECK(t.matp_mask[p] == (s % 2 == 1));
    if (s % 2 == 1) CHECK(t.targets[p] == x[static_cast<std::size_t>(s)]);
    CHECK(in[p] == ms.tokens[static_cast<std::size_t>(s)]);
  }
  for (std::int32_t s = 4; s < 8; ++s) {
    const std::size_t p = slot_of(l, Segment::MaskedDup, s);
    CHECK(t.matp_mask[p] == 1);
    CHECK(t.targets[p] == x[static_cast<std::size_t>(s)]);
  }
  for (std::int32_t s = 0; s < 8; ++s) {
    const std::size_t p = slot_of(l, Segment::Clean, s);
    CHECK(in[p] == x[static_cast<std::size_t>(s)]);
    CHECK(t.matp_mask[p] == 0);
    if (s < 7) {
      CHECK(t.ntp_mask[p] == 1);
      CHECK(t.targets[p] == x[static_cast<std::size_t>(s) + 1]);
    } else {
      CHECK(t.ntp_mask[p] == 0);
    }
  }

  MaskedSequence clean{x, std::vector<std::uint8_t>(8, 0), 0.0};
  const TrainingTargets tc = training_targets(l, x, clean);
  for (auto v : tc.matp_mask) CHECK(v == 0);
}
