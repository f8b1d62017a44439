#include <doctest.h>

#include <cmath>
#include <sstream>

#include "sbd/errors.hpp"
#include "sbd/model/transformer.hpp"
#include "sbd/training/trainer.hpp"
#include "loss_oracle.hpp"

using namespace sbd;

namespace {

ModelConfig tiny(std::size_t vocab = 9, std::size_t layers = 2) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.d_model = 8;
  c.n_layers = layers;
  c.n_heads = 2;
  c.d_ff = 12;
  c.max_seq_len = 64;
  return c;
}

TokenSequence random_tokens(Rng& rng, std::size_t n, std::size_t vocab) {
  TokenSequence t(n);
  for (auto& x : t) x = static_cast<std::int32_t>(uniform_int(rng, 0, static_cast<std::int64_t>(vocab) - 1));
  return t;
}

// Period-5 pattern: learnable, so loss must fall quickly.
TokenSequence pattern_corpus(std::size_t n) {
  TokenSequence t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<std::int32_t>((i * 3) % 5);
  return t;
}

double max_rel_diff(const ModelParams<double>& a, const ModelParams<double>& b) {
  double worst = 0.0;
  auto na = a.named();
  auto nb = b.named();
  for (std::size_t i = 0; i < na.size(); ++i) {
    for (std::size_t j = 0; j < na[i].second->size(); ++j) {
      const double x = (*na[i].second)[j], y = (*nb[i].second)[j];
      worst = std::max(worst, std::abs(x - y) / std::max(1e-12, std::abs(x) + std::abs(y)));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("loss mode names round trip") {
  for (LossMode m : {LossMode::SBD, LossMode::NTP, LossMode::SBDWithoutNTP}) CHECK(parse_loss_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_loss_mode("bogus"), ConfigError);
}

TEST_CASE("sbd_loss equals the literal per-block evaluation") {
  const auto params = ModelParams<double>::init(tiny(), 3);
  const Model<double> model(params);
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t k = static_cast<std::size_t>(uniform_int(rng, 2, 5));
    const std::size_t L = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(k), 20));
    const TokenSequence x = random_tokens(rng, L, 9);
    const MaskedSequence ms = make_masked_sequence(x, uniform01(rng), params.config.mask_token_id(), rng);
    const LossBreakdown got = sbd_loss<double>(params, x, k, ms);
    const auto [ntp, matp] = literal_sbd_loss(model, x, k, ms);
    CHECK(std::abs(got.ntp - ntp) < 1e-6);
    CHECK(std::abs(got.matp - matp) < 1e-6);
    CHECK(got.total == doctest::Approx(got.ntp + got.matp));
  }
}

TEST_CASE("L=8, k=4 fixed seed example") {
  const auto params = ModelParams<double>::init(tiny(), 4);
  const TokenSequence x{1, 4, 2, 8, 5, 7, 0, 3};
  Rng rng(2024);
  const MaskedSequence ms = make_masked_sequence(x, 0.5, params.config.mask_token_id(), rng);
  const LossBreakdown got = sbd_loss<double>(params, x, 4, ms);
  const auto [ntp, matp] = literal_sbd_loss(Model<double>(params), x, 4, ms);
  CHECK(std::abs(got.ntp - ntp) < 1e-6);
  CHECK(std::abs(got.matp - matp) < 1e-6);
}

TEST_CASE("eta zero leaves only the next-token term") {
  const auto params = ModelParams<double>::init(tiny(), 5);
  Rng rng(1);
  const TokenSequence x = random_tokens(rng, 12, 9);
  Rng r2(9);
  const LossBreakdown sbd = sbd_loss<double>(params, x, 4, 0.0, r2);
  const LossBreakdown ntp = ntp_loss<double>(params, x);
  CHECK(sbd.matp == 0.0);
  CHECK(sbd.matp_count == 0);
  CHECK(sbd.ntp == ntp.ntp);
}

TEST_CASE("uniform model gives ln V on every masked position") {
  auto params = ModelParams<double>::init(tiny(8), 6);
  params.lm_head.fill(0.0);
  const TokenSequence x{1, 2, 3, 4, 5, 6, 7, 0};
  MaskedSequence all{TokenSequence(8, params.config.mask_token_id()), std::vector<std::uint8_t>(8, 1), 1.0};
  const LossBreakdown got = sbd_loss<double>(params, x, 4, all);
  CHECK(got.matp == doctest::Approx(std::log(8.0)).epsilon(1e-12));
  CHECK(got.matp_count == 8);
}

TEST_CASE("full SBD loss gradient matches finite differences") {
  auto params = ModelParams<double>::init(tiny(), 7);
  Rng rng(5);
  const TokenSequence x = random_tokens(rng, 10, 9);
  const MaskedSequence ms = make_masked_sequence(x, 0.6, params.config.mask_token_id(), rng);
  auto grads = ModelParams<double>::zeros(params.config);
  sbd_loss<double>(params, x, 3, ms, {}, &grads);

  const double h = 1e-5;
  double worst = 0.0;
  auto np = params.named();
  auto ng = grads.named();
  for (std::size_t i = 0; i < np.size(); ++i) {
    for (std::size_t j = 0; j < np[i].second->size(); ++j) {
      double& w = (*np[i].second)[j];
      const double saved = w;
      w = saved + h;
      const double up = sbd_loss<double>(params, x, 3, ms).total;
      w = saved - h;
      const double down = sbd_loss<double>(params, x, 3, ms).total;
      w = saved;
      const double fd = (up - down) / (2 * h);
      const double an = (*ng[i].second)[j];
      worst = std::max(worst, std::abs(fd - an) / std::max(1e-6, std::abs(fd) + std::abs(an)));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("NTP mode gradients match a plain causal model") {
  const auto params = ModelParams<double>::init(tiny(), 8);
  Rng rng(3);
  std::vector<TokenSequence> batch{random_tokens(rng, 11, 9), random_tokens(rng, 11, 9)};
  BatchOptions opt;
  opt.mode = LossMode::NTP;
  auto g1 = ModelParams<double>::zeros(params.config);
  const LossBreakdown l1 = batch_loss<double>(params, batch, 0, {}, opt, &g1);
  CHECK(l1.matp == 0.0);

  // Reference: plain causal graph with a hand-built lower-triangular mask.
  auto g2 = ModelParams<double>::zeros(params.config);
  const std::size_t n = 11;
  AttentionMaskSpec causal(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) causal.set(i, j, true);
  }
  std::vector<std::int32_t> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = static_cast<std::int32_t>(i);
  for (const auto& x : batch) {
    Tape<double> tape;
    Var logits = transformer_graph<double>(tape, params, &g2, x, pos, causal);
    std::vector<std::int32_t> tgt(n, 0);
    std::vector<std::uint8_t> m(n, 0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      tgt[i] = x[i + 1];
      m[i] = 1;
    }
    tape.backward(ag::scale(tape, ag::cross_entropy(tape, logits, tgt, m, 1.0 / 20.0), 1.0));
  }
  CHECK(max_rel_diff(g1, g2) < 1e-10);
}

TEST_CASE("ablation mode takes no gradient from the NTP term") {
  const auto params = ModelParams<double>::init(tiny(), 9);
  Rng rng(4);
  std::vector<TokenSequence> batch{random_tokens(rng, 12, 9), random_tokens(rng, 12, 9)};
  std::vector<MaskedSequence> masks;
  for (const auto& x : batch) masks.push_back(make_masked_sequence(x, 0.5, params.config.mask_token_id(), rng));
  BatchOptions with_log;
  with_log.mode = LossMode::SBDWithoutNTP;
  BatchOptions without = with_log;
  without.log_ntp = false;
  auto g1 = ModelParams<double>::zeros(params.config);
  auto g2 = ModelParams<double>::zeros(params.config);
  const LossBreakdown l1 = batch_loss<double>(params, batch, 4, masks, with_log, &g1);
  const LossBreakdown l2 = batch_loss<double>(params, batch, 4, masks, without, &g2);
  CHECK(l1.ntp > 0.0);
  CHECK(l2.ntp == 0.0);
  CHECK(l1.matp == l2.matp);
  CHECK(l1.total == l1.matp);
  auto a = g1.named();
  auto b = g2.named();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].second->data().size() == b[i].second->data().size());
  CHECK(max_rel_diff(g1, g2) == 0.0);
}

TEST_CASE("sample_block_size") {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(sample_block_size(rng, 4, 4) == 4);
  std::vector<std::size_t> counts(17, 0);
  const std::size_t n = 100000;
  for (std::size_t i = 0; i < n; ++i) ++counts[sample_block_size(rng, 2, 16)];
  // Each of the 15 values: mean n/15, sd sqrt(n * (1/15) * (14/15)).
  const double mean = n / 15.0;
  const double sd = std::sqrt(n * (1.0 / 15.0) * (14.0 / 15.0));
  for (std::size_t k = 2; k <= 16; ++k) CHECK(std::abs(static_cast<double>(counts[k]) - mean) < 3 * sd);
  CHECK(counts[0] + counts[1] == 0);
  Rng a(77), b(77);
  for (int i = 0; i < 50; ++i) CHECK(sample_block_size(a, 2, 3) == sample_block_size(b, 2, 3));
}

TEST_CASE("learning rate schedule") {
  const ScheduleConfig s{1.0, 10, 0.1, 110};
  CHECK(learning_rate(s, 0) == doctest::Approx(0.1));
  CHECK(learning_rate(s, 9) == doctest::Approx(1.0));
  CHECK(learning_rate(s, 10) == doctest::Approx(1.0));
  CHECK(learning_rate(s, 60) == doctest::Approx(0.55));
  CHECK(learning_rate(s, 110) == doctest::Approx(0.1));
}

TEST_CASE("training runs: zero steps, determinism, loss decrease, exhaustion") {
  TrainConfig cfg;
  cfg.model = tiny(5, 1);
  cfg.model.d_model = 16;
  cfg.model.d_ff = 32;
  cfg.seq_len = 16;
  cfg.batch_size = 4;
  cfg.k_min = 2;
  cfg.k_max = 4;
  cfg.lr = 1e-2;
  cfg.warmup_steps = 10;
  cfg.precision = "f64";
  cfg.deterministic = true;
  cfg.epochs = 1000;
  const TokenSequence corpus = pattern_corpus(16 * 40);

  SUBCASE("zero steps leave parameters untouched") {
    cfg.steps = 0;
    cfg.loss_mode = LossMode::NTP;
    const auto init = ModelParams<double>::init(cfg.model, 1);
    const auto r = train<double>(cfg, corpus, &init);
    CHECK(r.records.empty());
    CHECK(max_rel_diff(r.params, init) == 0.0);
  }
  SUBCASE("same seed, identical records and CSV") {
    cfg.steps = 15;
    const auto a = train<double>(cfg, corpus);
    const auto b = train<double>(cfg, corpus);
    CHECK(a.records == b.records);
    std::ostringstream sa, sb;
    for (const auto& r : a.records) write_train_csv_row(sa, r);
    for (const auto& r : b.records) write_train_csv_row(sb, r);
    CHECK(sa.str() == sb.str());
    for (const auto& r : a.records) {
      CHECK(r.k >= 2);
      CHECK(r.k <= 4);
      CHECK(r.wall_ms == 0.0);
    }
  }
  SUBCASE("loss decreases on a learnable corpus") {
    cfg.steps = 200;
    const auto r = train<double>(cfg, corpus);
    CHECK(r.records.back().total_loss < r.records.front().total_loss);
    CHECK(r.records.back().ntp_loss < 0.5 * r.records.front().ntp_loss);
  }
  SUBCASE("corpus exhaustion") {
    cfg.steps = 30;
    cfg.epochs = 1;
    CHECK_THROWS_AS(train<double>(cfg, corpus), DataError);
  }
  SUBCASE("config errors") {
    cfg.k_min = 1;
    CHECK_THROWS_AS(train<double>(cfg, corpus), ConfigError);
  }
}

TEST_CASE("CSV header") {
  std::ostringstream out;
  write_train_csv_header(out);
  CHECK(out.str() == "step,k,ntp_loss,matp_loss,total_loss,grad_norm,wall_ms\n");
}
