#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "sbd/errors.hpp"
#include "sbd/model/checkpoint.hpp"
#include "sbd/model/transformer.hpp"

using namespace sbd;

namespace {

ModelConfig tiny(bool rope = true) {
  ModelConfig c;
  c.vocab_size = 11;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ff = 24;
  c.max_seq_len = 64;
  c.use_rope = rope;
  return c;
}

TokenSequence random_tokens(Rng& rng, std::size_t n, std::int32_t vocab) {
  TokenSequence t(n);
  for (auto& x : t) x = static_cast<std::int32_t>(uniform_int(rng, 0, vocab - 1));
  return t;
}

template <typename T>
double max_abs_diff_rows(const Tensor<T>& a, std::size_t ra, const Tensor<T>& b, std::size_t rb, std::size_t rows) {
  double worst = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) {
      worst = std::max(worst, std::abs(static_cast<double>(a(ra + r, c)) - static_cast<double>(b(rb + r, c))));
    }
  }
  return worst;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig c = tiny();
  c.n_heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(tiny().mask_token_id() == 11);
}

TEST_CASE("causal input gives one row per token and ignores the future") {
  const Model<double> m(ModelParams<double>::init(tiny(), 1));
  Rng rng(3);
  ForwardRequest req;
  req.past_tokens = random_tokens(rng, 9, 11);
  const Tensor<double> base = m.forward(req);
  CHECK(base.rows() == 9);
  CHECK(base.cols() == 11);
  for (std::size_t cut = 0; cut < 8; ++cut) {
    ForwardRequest pert = req;
    for (std::size_t j = cut + 1; j < 9; ++j) pert.past_tokens[j] = (pert.past_tokens[j] + 5) % 11;
    const Tensor<double> out = m.forward(pert);
    CHECK(max_abs_diff_rows(base, 0, out, 0, cut + 1) == 0.0);
  }
}

TEST_CASE("all-mask block is permutation symmetric without positions") {
  const Model<double> m(ModelParams<double>::init(tiny(false), 2));
  const std::int32_t M = m.config().mask_token_id();
  ForwardRequest req;
  req.block_tokens = {M, M, 3, 7};
  const Tensor<double> a = m.forward(req);
  CHECK(a.rows() == 4);
  // Swap the ids at the two non-mask positions; rows 0 and 1 must not move.
  req.block_tokens = {M, M, 7, 3};
  const Tensor<double> b = m.forward(req);
  CHECK(max_abs_diff_rows(a, 0, b, 0, 2) < 1e-12);
  CHECK(max_abs_diff_rows(a, 0, a, 1, 1) < 1e-12);
}

TEST_CASE("block positions see each other but clean positions do not see the block") {
  const Model<double> m(ModelParams<double>::init(tiny(), 4));
  const std::int32_t M = m.config().mask_token_id();
  Rng rng(8);
  ForwardRequest req;
  req.past_tokens = random_tokens(rng, 5, 11);
  req.block_tokens = {M, M, M, M};
  const Tensor<double> a = m.forward(req);
  req.block_tokens[2] = 6;
  const Tensor<double> b = m.forward(req);
  CHECK(max_abs_diff_rows(a, 0, b, 0, 5) == 0.0);
  for (std::size_t r = 5; r < 9; ++r) CHECK(max_abs_diff_rows(a, r, b, r, 1) > 1e-9);
}

TEST_CASE("cached and uncached forwards agree") {
  Rng rng(12);
  const ModelConfig cfg = [] {
    ModelConfig c = tiny();
    c.n_layers = 4;
    return c;
  }();
  const auto pd = ModelParams<double>::init(cfg, 9);
  const Model<double> md(pd);
  const Model<float> mf(pd.cast<float>());
  const std::int32_t M = cfg.mask_token_id();
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t P = static_cast<std::size_t>(uniform_int(rng, 1, 20));
    const std::size_t fresh = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(P) - 1));
    const std::size_t k = static_cast<std::size_t>(uniform_int(rng, 1, 6));
    const TokenSequence prefix = random_tokens(rng, P, 11);
    TokenSequence block = random_tokens(rng, k, 11);
    for (auto& b : block) {
      if (uniform01(rng) < 0.5) b = M;
    }
    ForwardRequest full{prefix, block, {}, nullptr};
    const Tensor<double> ref = md.forward(full);
    const Tensor<float> ref32 = mf.forward(full);

    KVCache<double> cd(cfg);
    KVCache<float> cf(cfg);
    ForwardRequest warm{TokenSequence(prefix.begin(), prefix.end() - static_cast<std::ptrdiff_t>(fresh)), {}, {}, nullptr};
    md.forward_with_cache_update(warm, cd);
    mf.forward_with_cache_update(warm, cf);
    ForwardRequest rest{TokenSequence(prefix.end() - static_cast<std::ptrdiff_t>(fresh), prefix.end()), block, {}, nullptr};
    const Tensor<double> got = md.forward_with_cache_update(rest, cd);
    const Tensor<float> got32 = mf.forward_with_cache_update(rest, cf);
    CHECK(cd.length() == P);
    CHECK(max_abs_diff_rows(ref, P - fresh, got, 0, fresh + k) < 1e-10);
    CHECK(max_abs_diff_rows(ref32, P - fresh, got32, 0, fresh + k) < 1e-5);
  }
}

TEST_CASE("cache update rules") {
  const ModelConfig cfg = tiny();
  const Model<double> m(ModelParams<double>::init(cfg, 5));
  const std::int32_t M = cfg.mask_token_id();
  KVCache<double> cache(cfg);

  const Tensor<double> pre = m.forward_with_cache_update({{1, 2, 3, 4, 5}, {}, {}, nullptr}, cache);
  CHECK(cache.length() == 5);
  CHECK(pre.rows() == 5);

  // First block iteration: previous block (3 clean) + 3 masks, cache grows by 3.
  const Tensor<double> first = m.forward_with_cache_update({{6, 7, 8}, {M, M, M}, {}, nullptr}, cache);
  CHECK(first.rows() == 6);
  CHECK(cache.length() == 8);
  // Later iteration: only the block, cache unchanged.
  const Tensor<double> later = m.forward_with_cache_update({{}, {M, 2, M}, {}, nullptr}, cache);
  CHECK(later.rows() == 3);
  CHECK(cache.length() == 8);

  // Past tokens that do not continue the cache are rejected.
  CHECK_THROWS_AS(m.forward_with_cache_update({{1}, {M}, {3, 4}, nullptr}, cache), CacheError);
}

TEST_CASE("capacity and mask shape errors") {
  const ModelConfig cfg = tiny();
  const Model<double> m(ModelParams<double>::init(cfg, 5));
  ForwardRequest req{{1, 2}, {}, {0, 64}, nullptr};
  CHECK_THROWS_AS(m.forward(req), CapacityError);
  const AttentionMaskSpec wrong = build_inference_mask(3, 0);
  ForwardRequest bad{{1, 2}, {}, {}, &wrong};
  CHECK_THROWS_AS(m.forward(bad), MaskError);
  ForwardRequest oov{{1, 12}, {}, {}, nullptr};
  CHECK_THROWS_AS(m.forward(oov), ConfigError);
}

TEST_CASE("output head never produces the mask token") {
  const Model<double> m(ModelParams<double>::init(tiny(), 6));
  const std::int32_t M = m.config().mask_token_id();
  const Tensor<double> out = m.forward({{M, M, 1}, {M, M}, {}, nullptr});
  CHECK(out.cols() == static_cast<std::size_t>(M));
}

TEST_CASE("checkpoint round trip is byte identical") {
  const auto dir = std::filesystem::temp_directory_path() / "sbd_test_ckpt";
  std::filesystem::create_directories(dir);
  const auto p = ModelParams<double>::init(tiny(), 13);
  const nlohmann::json meta = {{"tokenizer", "byte"}, {"note", "x"}};
  save_checkpoint(dir / "a.sbd", p, meta);
  nlohmann::json meta2;
  const auto q = load_checkpoint<double>(dir / "a.sbd", &meta2);
  CHECK(meta2 == meta);
  CHECK(q.config == p.config);
  save_checkpoint(dir / "b.sbd", q, meta2);
  CHECK(slurp(dir / "a.sbd") == slurp(dir / "b.sbd"));
  CHECK(slurp(dir / "a.sbd").substr(0, 4) == "SBD1");

  const auto f = load_checkpoint<float>(dir / "a.sbd");
  CHECK(std::abs(static_cast<double>(f.lm_head[3]) - p.lm_head[3]) < 1e-6);
  save_checkpoint(dir / "c.sbd", f, meta);
  const auto f2 = load_checkpoint<float>(dir / "c.sbd");
  save_checkpoint(dir / "d.sbd", f2, meta);
  CHECK(slurp(dir / "c.sbd") == slurp(dir / "d.sbd"));

  CHECK_THROWS_AS(load_checkpoint<double>(dir / "missing.sbd"), IoError);
  std::ofstream(dir / "junk.sbd") << "nope";
  CHECK_THROWS_AS(load_checkpoint<double>(dir / "junk.sbd"), IoError);
  std::filesystem::remove_all(dir);
}
