#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "oracle_session.hpp"
#include "sbd/errors.hpp"
#include "sbd/inference/generate.hpp"

using namespace sbd;
using sbd::testing::OracleSession;

namespace {

using Idx = std::vector<std::size_t>;

ModelConfig tiny_config() {
  ModelConfig c;
  c.vocab_size = 16;
  c.d_model = 32;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ff = 64;
  c.max_seq_len = 96;
  return c;
}

SamplerConfig sampler(SamplerVariant v, std::size_t k, std::size_t max_tokens) {
  SamplerConfig s;
  s.variant = v;
  s.k = k;
  s.max_tokens = max_tokens;
  return s;
}

void check_trace_invariants(const GenerationResult& r, const SamplerConfig& cfg) {
  std::size_t revealed = 0;
  for (const BlockTrace& b : r.trace.blocks) {
    CHECK(b.forwards >= 1);
    CHECK(b.forwards <= b.k);
    CHECK(b.revealed_per_forward.size() == b.forwards);
    CHECK(b.forwarded_tokens.size() == b.forwards);
    CHECK(b.entropies.size() == b.k);
    for (std::size_t n : b.revealed_per_forward) {
      CHECK(n >= 1);
      revealed += n;
    }
    if (cfg.variant == SamplerVariant::NTP) CHECK(b.forwards == b.k);
  }
  CHECK(revealed == r.trace.tokens_generated);
}

}  // namespace

TEST_CASE("eb_select_entropy worked examples") {
  const std::vector<double> h{0.05, 0.2, 0.5};
  CHECK(eb_select_entropy(h, 0.1) == Idx{0, 1});
  CHECK(eb_select_entropy(h, 0.0) == Idx{0});
  CHECK(eb_select_entropy(std::vector<double>{0, 0, 0}, 0.0) == Idx{0, 1, 2});
  CHECK(eb_select_entropy(h, 1e9) == Idx{0, 1, 2});
  // Unsorted input: ascending entropy, ties by index.
  CHECK(eb_select_entropy(std::vector<double>{0.3, 0.01, 0.05, 0.2}, 0.1) == Idx{1, 2, 3});
  CHECK(eb_select_entropy(std::vector<double>{0.4, 0.1, 0.1}, 0.1) == Idx{1, 2});
  CHECK(eb_select_entropy(std::vector<double>{0.7}, 0.0) == Idx{0});
}

TEST_CASE("eb_select_confidence worked examples") {
  // Entropies listed in confidence order.
  CHECK(eb_select_confidence(std::vector<double>{0.9, 0.8}, std::vector<double>{0.3, 0.4}, 0.25) == Idx{0});
  CHECK(eb_select_confidence(std::vector<double>{0.9, 0.8}, std::vector<double>{0.3, 0.4}, 0.3) == Idx{0, 1});
  CHECK(eb_select_confidence(std::vector<double>{0.5, 0.9, 0.7}, std::vector<double>{0, 0, 0}, 0.0) == Idx{1, 2, 0});
  CHECK(eb_select_confidence(std::vector<double>{0.2}, std::vector<double>{2.0}, 0.0) == Idx{0});
  CHECK_THROWS_AS(eb_select_confidence(std::vector<double>{0.2}, std::vector<double>{}, 0.0), ConfigError);
}

TEST_CASE("factor_select literal and complement readings") {
  const std::vector<double> c{0.99, 0.98, 0.10};
  // (n+1) c_n: 1.98, 2.94, 0.40 against 2.5.
  CHECK(factor_select(c, 2.5, FactorRule::Literal) == Idx{0, 1, 2});
  // (n+1)(1 - c_n): 0.02, 0.06, 3.6.
  CHECK(factor_select(c, 2.5, FactorRule::Complement) == Idx{0, 1});
  CHECK(factor_select(std::vector<double>{0.3}, 0.0) == Idx{0});
  CHECK(factor_select(std::vector<double>{0.3}, 0.0, FactorRule::Complement) == Idx{0});
  const std::vector<double> many{0.1, 0.99, 0.5, 0.7};
  CHECK(factor_select(many, std::numeric_limits<double>::infinity()).size() == 4);
  CHECK(factor_select(many, std::numeric_limits<double>::infinity(), FactorRule::Complement).size() == 4);
}

TEST_CASE("confidence-ordered selectors reveal prefixes of one ordering") {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const auto n = static_cast<std::size_t>(uniform_int(rng, 1, 9));
    std::vector<double> c(n), h(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse values so that ties occur.
      c[i] = static_cast<double>(uniform_int(rng, 1, 5)) / 5.0;
      h[i] = static_cast<double>(uniform_int(rng, 0, 4)) / 4.0;
    }
    const Idx order = confidence_order(c);
    const double gamma = uniform01(rng);
    const double f = 4.0 * uniform01(rng);
    for (const Idx& s : {eb_select_confidence(c, h, gamma), factor_select(c, f, FactorRule::Literal),
                         factor_select(c, f, FactorRule::Complement)}) {
      REQUIRE(!s.empty());
      REQUIRE(s.size() <= n);
      CHECK(std::equal(s.begin(), s.end(), order.begin()));
    }
  }
}

TEST_CASE("eb selectors grow with gamma") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(uniform_int(rng, 1, 12));
    std::vector<double> c(n), h(n);
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = 2.0 * uniform01(rng);
      c[i] = uniform01(rng);
    }
    std::size_t prev_e = 0, prev_c = 0;
    for (double g : {0.0, 0.1, 0.4, 1.5, 10.0, 1e9}) {
      const std::size_t se = eb_select_entropy(h, g).size();
      const std::size_t sc = eb_select_confidence(c, h, g).size();
      CHECK(se >= prev_e);
      CHECK(sc >= prev_c);
      prev_e = se;
      prev_c = sc;
    }
    CHECK(prev_e == n);
    CHECK(prev_c == n);
    CHECK(eb_select_entropy(h, 0.0).size() == 1);
  }
}

TEST_CASE("token_sample") {
  Rng rng(3);
  const std::vector<double> uniform(5, 0.2);
  CHECK(token_sample(uniform, 0.0, rng) == 0);
  const std::vector<double> onehot{0, 0, 1, 0};
  for (double temp : {0.0, 0.5, 1.0, 3.0}) CHECK(token_sample(onehot, temp, rng) == 2);
  CHECK(token_sample(std::vector<double>{0.1, 0.45, 0.45}, 0.0, rng) == 1);

  // Inverse-CDF oracle on the same stream.
  const std::vector<double> p{0.1, 0.25, 0.4, 0.25};
  Rng a(77), b(77);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(b);
    std::int32_t want = 3;
    double acc = 0.0;
    for (std::int32_t v = 0; v < 4; ++v) {
      acc += p[static_cast<std::size_t>(v)];
      if (u < acc) {
        want = v;
        break;
      }
    }
    REQUIRE(token_sample(p, 1.0, a) == want);
  }

  // Temperature 0.5 squares then renormalises.
  std::vector<int> counts(4, 0);
  const int n = 40000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(token_sample(p, 0.5, rng))];
  const double z = 0.01 + 0.0625 + 0.16 + 0.0625;
  for (std::size_t v = 0; v < 4; ++v) {
    const double q = p[v] * p[v] / z;
    CHECK(std::abs(counts[v] / double(n) - q) < 4.0 * std::sqrt(q * (1 - q) / n));
  }
  CHECK_THROWS_AS(token_sample(std::vector<double>{}, 1.0, rng), NumericError);
}

TEST_CASE("sampler config validation and names") {
  for (auto v : {SamplerVariant::NTP, SamplerVariant::EBEntropy, SamplerVariant::EBConfidence, SamplerVariant::Factor}) {
    CHECK(parse_variant(to_string(v)) == v);
  }
  CHECK(parse_variant("EB") == SamplerVariant::EBEntropy);
  CHECK_THROWS_AS(parse_variant("greedy"), ConfigError);
  SamplerConfig s;
  s.gamma = -0.1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.gamma = 0.0;
  s.k = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.k = 1;
  s.temperature = -1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("NTP decoding uses one forward per token") {
  OracleSession oracle(6, [](std::size_t pos, std::int32_t prev) { return testing::skewed_marginal(6, pos, prev); });
  auto cfg = sampler(SamplerVariant::NTP, 4, 10);
  cfg.temperature = 1.0;
  cfg.seed = 9;
  const TokenSequence prompt{1, 2, 3};
  const GenerationResult r = generate(oracle, prompt, cfg);
  CHECK(r.tokens.size() == 10);
  CHECK(r.trace.total_forwards == 10);
  CHECK(r.trace.nfe_speedup() == 1.0);
  // Prefill of the first two prompt tokens, then one forward per token.
  CHECK(oracle.forwards == 11);
  REQUIRE(r.trace.blocks.size() == 3);
  CHECK(r.trace.blocks[2].k == 2);
  check_trace_invariants(r, cfg);
}

TEST_CASE("zero-entropy marginals decode each block in one forward") {
  auto det = [](std::size_t pos, std::int32_t prev) {
    std::vector<double> p(5, 0.0);
    p[(pos * 3 + static_cast<std::size_t>(prev)) % 5] = 1.0;
    return p;
  };
  for (auto v : {SamplerVariant::EBEntropy, SamplerVariant::EBConfidence}) {
    OracleSession oracle(5, det);
    auto cfg = sampler(v, 4, 16);
    cfg.gamma = 0.0;
    const GenerationResult r = generate(oracle, TokenSequence{0}, cfg);
    CHECK(r.trace.total_forwards == 4);
    CHECK(r.trace.nfe_speedup() == 4.0);
    for (const BlockTrace& b : r.trace.blocks) CHECK(b.revealed_per_forward == Idx{4});
    check_trace_invariants(r, cfg);
  }
}

TEST_CASE("gamma zero reveals one token per forward in entropy order") {
  OracleSession oracle(6, [](std::size_t pos, std::int32_t prev) { return testing::skewed_marginal(6, pos, prev); });
  // Make the entropy differ per position so the order is informative.
  auto dist = [](std::size_t pos, std::int32_t) {
    std::vector<double> p(4, 0.0);
    const double top = 0.4 + 0.1 * static_cast<double>(pos % 5);
    p[pos % 4] = top;
    for (std::size_t v = 0; v < 4; ++v) {
      if (v != pos % 4) p[v] = (1.0 - top) / 3.0;
    }
    return p;
  };
  OracleSession graded(4, dist);
  auto cfg = sampler(SamplerVariant::EBEntropy, 5, 5);
  cfg.gamma = 0.0;
  const GenerationResult r = generate(graded, TokenSequence{0}, cfg);
  REQUIRE(r.trace.blocks.size() == 1);
  const BlockTrace& b = r.trace.blocks[0];
  CHECK(b.forwards == 5);
  CHECK(b.revealed_per_forward == Idx{1, 1, 1, 1, 1});
  // Positions 1..5 carry top mass 0.5, 0.6, 0.7, 0.8, 0.4: lowest entropy first.
  CHECK(b.reveal_forward == Idx{3, 2, 1, 0, 4});
  for (std::size_t i = 1; i < b.entropies.size(); ++i) CHECK(b.entropies[i] >= b.entropies[i - 1]);
  for (std::size_t j = 0; j < 5; ++j) CHECK(r.tokens[j] == static_cast<std::int32_t>((j + 1) % 4));
}

TEST_CASE("factorized oracle: block samples follow the product of marginals") {
  const std::size_t V = 4, k = 2;
  const TokenSequence prompt{2, 1};
  auto dist = [V](std::size_t pos, std::int32_t prev) { return testing::skewed_marginal(V, pos, prev); };
  std::vector<double> joint(V * V, 0.0);
  const auto p0 = dist(2, 1), p1 = dist(3, 1);
  for (std::size_t a = 0; a < V; ++a) {
    for (std::size_t b = 0; b < V; ++b) joint[a * V + b] = p0[a] * p1[b];
  }
  for (double gamma : {0.0, 0.4, 1e9}) {
    std::vector<double> hist(V * V, 0.0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      OracleSession oracle(V, dist);
      auto cfg = sampler(SamplerVariant::EBEntropy, k, k);
      cfg.gamma = gamma;
      cfg.temperature = 1.0;
      cfg.seed = derive_seed(1234, static_cast<std::uint64_t>(i));
      const GenerationResult r = generate(oracle, prompt, cfg);
      hist[static_cast<std::size_t>(r.tokens[0]) * V + static_cast<std::size_t>(r.tokens[1])] += 1.0 / n;
    }
    double tv = 0.0;
    for (std::size_t i = 0; i < hist.size(); ++i) tv += 0.5 * std::abs(hist[i] - joint[i]);
    CHECK(tv < 0.02);
  }
}

TEST_CASE("stop token truncates output after finishing its block") {
  // Deterministic: the token at position p is p mod 7; 7 never appears, 6 is the stop.
  auto det = [](std::size_t pos, std::int32_t) {
    std::vector<double> p(8, 0.0);
    p[pos % 7] = 1.0;
    return p;
  };
  OracleSession oracle(8, det);
  auto cfg = sampler(SamplerVariant::EBEntropy, 4, 24);
  cfg.stop_token_ids = {6};
  // Prompt of 3 tokens: generated offset i sits at position 3 + i, so offset 3 is the stop.
  const GenerationResult r = generate(oracle, TokenSequence{0, 1, 2}, cfg);
  CHECK(r.tokens == TokenSequence{3, 4, 5, 6});
  REQUIRE(r.trace.stop_offset.has_value());
  CHECK(*r.trace.stop_offset == 3);
  CHECK(r.trace.blocks.size() == 1);
  CHECK(r.trace.tokens_to_stop == 4);

  // Two uncertain positions in the second block: with gamma 0 the later one
  // (the stop) waits for a second forward.
  auto graded = [](std::size_t pos, std::int32_t) {
    std::vector<double> p(8, 0.0);
    if (pos == 5 || pos == 6) {
      p[pos] = 0.9;
      p[0] = 0.1;
    } else {
      p[pos % 6] = 1.0;
    }
    return p;
  };
  OracleSession o2(8, graded);
  auto cfg2 = sampler(SamplerVariant::EBEntropy, 3, 12);
  cfg2.gamma = 0.0;
  cfg2.stop_token_ids = {6};
  const GenerationResult r2 = generate(o2, TokenSequence{0}, cfg2);
  // Positions 1..3 in block 0, 4..6 in block 1.
  CHECK(r2.tokens == TokenSequence{1, 2, 3, 4, 5, 6});
  REQUIRE(r2.trace.blocks.size() == 2);
  CHECK(r2.trace.blocks[1].forwards == 2);
  CHECK(r2.trace.total_forwards == 3);
  CHECK(r2.trace.forwards_to_stop == 3);
  CHECK(r2.trace.tokens_generated == 6);
  CHECK(r2.trace.nfe_speedup() == 2.0);
}

TEST_CASE("forwards to the stop position stop short of the block end") {
  // Stop at position 2 (certain); positions 1 and 3 are equally uncertain, so
  // position 3 is left for a second forward.
  auto dist = [](std::size_t pos, std::int32_t) {
    std::vector<double> p(4, 0.0);
    if (pos == 2) {
      p[2] = 1.0;
    } else {
      p[pos] = 0.9;
      p[0] = 0.1;
    }
    return p;
  };
  OracleSession oracle(4, dist);
  auto cfg = sampler(SamplerVariant::EBEntropy, 3, 6);
  cfg.gamma = 0.0;
  cfg.stop_token_ids = {2};
  const GenerationResult r = generate(oracle, TokenSequence{0}, cfg);
  REQUIRE(r.trace.blocks.size() == 1);
  CHECK(r.trace.blocks[0].forwards == 2);
  CHECK(r.tokens == TokenSequence{1, 2});
  CHECK(r.trace.tokens_to_stop == 2);
  CHECK(r.trace.forwards_to_stop == 1);
  CHECK(r.trace.nfe_speedup_to_stop() == 2.0);
  CHECK(r.trace.nfe_speedup() == 1.5);
}

TEST_CASE("model decoding: cache on and off agree, forward counts follow the block schedule") {
  const ModelConfig mc = tiny_config();
  const Model<double> model(ModelParams<double>::init(mc, 21));
  const Model<float> model_f(ModelParams<double>::init(mc, 21).cast<float>());
  const TokenSequence prompt{3, 1, 4, 1, 5};
  for (auto v : {SamplerVariant::NTP, SamplerVariant::EBEntropy, SamplerVariant::EBConfidence, SamplerVariant::Factor}) {
    for (double temp : {0.0, 1.0}) {
      auto cfg = sampler(v, 4, 18);
      cfg.gamma = 2.0;
      cfg.f = 0.5;
      cfg.temperature = temp;
      cfg.seed = 17;
      ModelSession<double> cached(model, true);
      const GenerationResult a = generate(cached, prompt, cfg);
      cfg.use_cache = false;
      ModelSession<double> plain(model, false);
      const GenerationResult b = generate(plain, prompt, cfg);
      CHECK(a.tokens == b.tokens);
      CHECK(a.trace.total_forwards == b.trace.total_forwards);
      CHECK(a.tokens.size() == 18);
      check_trace_invariants(a, cfg);

      ModelSession<float> cf(model_f, true), pf(model_f, false);
      CHECK(generate(cf, prompt, cfg).tokens == generate(pf, prompt, cfg).tokens);

      if (v == SamplerVariant::NTP) continue;
      REQUIRE(a.trace.blocks.size() == 5);
      CHECK(a.trace.blocks.back().k == 2);
      for (const BlockTrace& blk : a.trace.blocks) {
        const std::size_t first = blk.forwarded_tokens.front();
        CHECK(first == (blk.t >= 4 ? 4 + blk.k : blk.t + blk.k));
        for (std::size_t i = 1; i < blk.forwarded_tokens.size(); ++i) CHECK(blk.forwarded_tokens[i] == blk.k);
      }
      // Everything except the last block ends up in the cache.
      CHECK(cached.cache().length() == prompt.size() + 16);
    }
  }
}

TEST_CASE("gamma zero greedy decoding is a function of model and prompt") {
  const Model<double> model(ModelParams<double>::init(tiny_config(), 8));
  auto cfg = sampler(SamplerVariant::EBEntropy, 3, 12);
  cfg.gamma = 0.0;
  const TokenSequence prompt{7, 7, 2};
  ModelSession<double> s1(model, true), s2(model, true);
  cfg.seed = 1;
  const auto a = generate(s1, prompt, cfg);
  cfg.seed = 999;
  const auto b = generate(s2, prompt, cfg);
  CHECK(a.tokens == b.tokens);
  CHECK(a.trace.total_forwards == 12);
}

TEST_CASE("generation errors") {
  const Model<double> model(ModelParams<double>::init(tiny_config(), 8));
  auto cfg = sampler(SamplerVariant::EBEntropy, 4, 100);
  ModelSession<double> s(model, true);
  CHECK_THROWS_AS(generate(s, TokenSequence{1}, cfg), CapacityError);
  cfg.max_tokens = 4;
  CHECK_THROWS_AS(generate(s, TokenSequence{}, cfg), ConfigError);
  CHECK_THROWS_AS(generate(s, TokenSequence{16}, cfg), ConfigError);
  generate(s, TokenSequence{1}, cfg);
  CHECK_THROWS_AS(generate(s, TokenSequence{1}, cfg), ConfigError);
}

TEST_CASE("trace JSONL round trip") {
  OracleSession oracle(6, [](std::size_t pos, std::int32_t prev) { return testing::skewed_marginal(6, pos, prev); });
  auto cfg = sampler(SamplerVariant::EBConfidence, 3, 10);
  cfg.gamma = 0.3;
  cfg.temperature = 1.0;
  cfg.stop_token_ids = {5};
  cfg.seed = 4;
  const GenerationResult r = generate(oracle, TokenSequence{1, 2}, cfg);
  std::stringstream ss;
  write_trace_jsonl(ss, r.trace, 0);
  write_trace_jsonl(ss, r.trace, 1);
  const std::vector<GenerationTrace> back = read_trace_jsonl(ss);
  REQUIRE(back.size() == 2);
  for (const GenerationTrace& t : back) {
    CHECK(t.total_forwards == r.trace.total_forwards);
    CHECK(t.tokens_generated == r.trace.tokens_generated);
    CHECK(t.stop_offset == r.trace.stop_offset);
    CHECK(t.forwards_to_stop == r.trace.forwards_to_stop);
    REQUIRE(t.blocks.size() == r.trace.blocks.size());
    for (std::size_t i = 0; i < t.blocks.size(); ++i) CHECK(t.blocks[i].entropies == r.trace.blocks[i].entropies);
  }
  std::stringstream bad("{\"gen\": 0, \"t\": 0}\n");
  CHECK_THROWS_AS(read_trace_jsonl(bad), IoError);
}
