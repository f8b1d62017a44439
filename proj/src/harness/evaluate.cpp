#include "sbd/harness/evaluate.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "sbd/errors.hpp"

namespace sbd {

std::string threshold_label(const SamplerConfig& cfg) {
  switch (cfg.variant) {
    case SamplerVariant::NTP: return "-";
    case SamplerVariant::Factor:
      return fmt::format("{}", cfg.f) + (cfg.factor_rule == FactorRule::Complement ? "c" : "");
    default: return fmt::format("{}", cfg.gamma);
  }
}

namespace {

struct Outcome {
  bool correct = false;
  GenerationTrace trace;
};

// Static round-robin would also be deterministic; a shared counter balances
// uneven generation lengths.
template <typename F>
void parallel_for(std::size_t n, std::size_t workers, F&& body) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

template <std::floating_point T>
EvalReport evaluate(const Model<T>& model, const Tokenizer& tokenizer, const std::vector<TaskInstance>& instances,
                    const std::vector<SamplerConfig>& samplers, const EvalOptions& opt) {
  if (tokenizer.size() != model.config().vocab_size) {
    throw ConfigError("tokenizer has " + std::to_string(tokenizer.size()) + " symbols but the model vocabulary is " +
                      std::to_string(model.config().vocab_size));
  }
  std::set<std::pair<std::string, std::string>> keys;
  for (const SamplerConfig& s : samplers) {
    s.validate();
    if (!keys.emplace(to_string(s.variant), threshold_label(s)).second) {
      throw ConfigError("duplicate sampler " + to_string(s.variant) + " @ " + threshold_label(s));
    }
  }
  std::vector<TokenSequence> prompts;
  for (const TaskInstance& inst : instances) prompts.push_back(tokenizer.encode(inst.prompt));
  const std::int32_t stop = tokenizer.id_of(std::string(1, kAnswerEnd));

  EvalReport report;
  for (const SamplerConfig& base : samplers) {
    SamplerConfig cfg = base;
    cfg.stop_token_ids.push_back(stop);
    std::vector<Outcome> outcomes(instances.size());
    const auto t0 = std::chrono::steady_clock::now();
    parallel_for(instances.size(), opt.workers, [&](std::size_t i) {
      SamplerConfig c = cfg;
      c.seed = derive_seed(cfg.seed, i);
      ModelSession<T> session(model, c.use_cache);
      GenerationResult r = generate(session, prompts[i], c);
      outcomes[i].correct = check_answer(instances[i].prompt, tokenizer.decode(r.tokens));
      outcomes[i].trace = std::move(r.trace);
    });
    EvalRow row;
    row.variant = to_string(cfg.variant);
    row.threshold = threshold_label(cfg);
    row.instances = instances.size();
    std::size_t correct = 0;
    std::vector<GenerationTrace> traces;
    for (Outcome& o : outcomes) {
      correct += o.correct ? 1 : 0;
      row.nfe_speedup += o.trace.nfe_speedup();
      row.nfe_speedup_to_stop += o.trace.nfe_speedup_to_stop();
      row.tokens_generated += o.trace.tokens_generated;
      row.forwards += o.trace.total_forwards;
      traces.push_back(std::move(o.trace));
    }
    if (!instances.empty()) {
      const auto n = static_cast<double>(instances.size());
      row.accuracy = static_cast<double>(correct) / n;
      row.nfe_speedup /= n;
      row.nfe_speedup_to_stop /= n;
    }
    if (!opt.deterministic) {
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    report.rows.push_back(row);
    report.traces.push_back(std::move(traces));
  }
  return report;
}

void write_eval_csv(std::ostream& out, const EvalReport& report) {
  out << "variant,threshold,instances,accuracy,nfe_speedup,nfe_speedup_to_stop,tokens_generated,forwards,wall_ms\n";
  for (const EvalRow& r : report.rows) {
    out << fmt::format("{},{},{},{},{},{},{},{},{:.3f}\n", r.variant, r.threshold, r.instances, r.accuracy,
                       r.nfe_speedup, r.nfe_speedup_to_stop, r.tokens_generated, r.forwards, r.wall_ms);
  }
}

template EvalReport evaluate<float>(const Model<float>&, const Tokenizer&, const std::vector<TaskInstance>&,
                                    const std::vector<SamplerConfig>&, const EvalOptions&);
template EvalReport evaluate<double>(const Model<double>&, const Tokenizer&, const std::vector<TaskInstance>&,
                                     const std::vector<SamplerConfig>&, const EvalOptions&);

}  // namespace sbd
