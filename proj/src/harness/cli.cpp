#include "sbd/harness/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>

#include <fmt/format.h>

#include "sbd/errors.hpp"
#include "sbd/harness/config_io.hpp"
#include "sbd/harness/evaluate.hpp"
#include "sbd/inference/session.hpp"
#include "sbd/model/checkpoint.hpp"
#include "sbd/roofline/calibration.hpp"

namespace sbd {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  return f;
}

// ---- train ----

struct TrainArgs {
  std::string config;
  std::string checkpoint;
  std::string log;
};

template <std::floating_point T>
void train_with(const TrainJob& job, const Corpus& corpus, std::ostream& out) {
  std::optional<std::ofstream> log;
  if (!job.log_csv.empty()) {
    log.emplace(open_out(job.log_csv));
    write_train_csv_header(*log);
  }
  const std::size_t every = std::max<std::size_t>(1, job.train.steps / 10);
  TrainResult<T> r = train<T>(job.train, corpus.tokens, nullptr, [&](const TrainStepRecord& rec) {
    if (log) write_train_csv_row(*log, rec);
    if (rec.step % every == 0 || rec.step + 1 == job.train.steps) {
      out << fmt::format("step {} k {} ntp {:.4f} matp {:.4f}\n", rec.step, rec.k, rec.ntp_loss, rec.matp_loss);
    }
  });
  json meta;
  meta["tokenizer"] = corpus.tokenizer.to_json();
  meta["train"] = to_json(job.train);
  meta["corpus"] = corpus.provenance;
  if (job.corpus.task) meta["task"] = job.corpus.task->to_json();
  save_checkpoint(job.checkpoint, r.params, meta);
  out << "checkpoint " << job.checkpoint.string() << "\n";
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainJob job = load_train_job(a.config);
  if (!a.checkpoint.empty()) job.checkpoint = a.checkpoint;
  if (!a.log.empty()) job.log_csv = a.log;
  const Corpus corpus = job.corpus.load();
  if (corpus.tokenizer.size() != job.train.model.vocab_size) {
    throw ConfigError(fmt::format("model vocab_size {} does not match the corpus tokenizer ({} symbols)",
                                  job.train.model.vocab_size, corpus.tokenizer.size()));
  }
  if (job.train.precision == "f64") {
    train_with<double>(job, corpus, out);
  } else {
    train_with<float>(job, corpus, out);
  }
  return 0;
}

// ---- checkpoints ----

struct Loaded {
  json meta;
  Tokenizer tokenizer = Tokenizer::byte_level();
  bool f64 = false;
};

Loaded inspect_checkpoint(const fs::path& path) {
  const json h = read_checkpoint_header(path);
  Loaded l;
  l.meta = h.value("meta", json::object());
  l.f64 = h.value("dtype", "") == "f64";
  if (!l.meta.contains("tokenizer")) throw ConfigError(path.string() + ": checkpoint carries no tokenizer");
  l.tokenizer = Tokenizer::from_json(l.meta["tokenizer"]);
  return l;
}

// Runs `fn` with a Model<float> or Model<double> matching the file.
template <typename Fn>
void with_model(const fs::path& path, bool f64, Fn&& fn) {
  if (f64) {
    const Model<double> m(load_checkpoint<double>(path));
    fn(m);
  } else {
    const Model<float> m(load_checkpoint<float>(path));
    fn(m);
  }
}

// ---- sample ----

struct SampleArgs {
  std::string ckpt;
  std::string prompt;
  std::string variant = "eb_entropy";
  double gamma = 0.1;
  double f = 2.5;
  std::string factor_rule = "literal";
  std::size_t k = 8;
  std::size_t max_tokens = 64;
  double temperature = 0.0;
  std::uint64_t seed = 0;
  std::string stop;
  std::string trace;
  bool no_cache = false;
};

FactorRule parse_factor_rule(const std::string& s) {
  if (s == "literal") return FactorRule::Literal;
  if (s == "complement") return FactorRule::Complement;
  throw ConfigError("unknown factor rule '" + s + "'");
}

int cmd_sample(const SampleArgs& a, std::ostream& out) {
  const Loaded l = inspect_checkpoint(a.ckpt);
  SamplerConfig cfg;
  cfg.variant = parse_variant(a.variant);
  cfg.gamma = a.gamma;
  cfg.f = a.f;
  cfg.factor_rule = parse_factor_rule(a.factor_rule);
  cfg.k = a.k;
  cfg.max_tokens = a.max_tokens;
  cfg.temperature = a.temperature;
  cfg.seed = env_seed_override().value_or(a.seed);
  cfg.use_cache = !a.no_cache;
  if (!a.stop.empty()) {
    for (std::int32_t id : l.tokenizer.encode(a.stop)) cfg.stop_token_ids.push_back(id);
  }
  cfg.validate();
  const TokenSequence prompt = l.tokenizer.encode(a.prompt);
  GenerationResult res;
  with_model(a.ckpt, l.f64, [&](const auto& model) {
    if (model.config().vocab_size != l.tokenizer.size()) throw ConfigError("checkpoint tokenizer and model disagree");
    ModelSession session(model, cfg.use_cache);
    res = generate(session, prompt, cfg);
  });
  if (!a.trace.empty()) {
    std::ofstream f = open_out(a.trace);
    write_trace_jsonl(f, res.trace, 0);
  }
  out << l.tokenizer.decode(res.tokens) << "\n";
  out << fmt::format("nfe_speedup {:.6f} tokens {} forwards {}\n", res.trace.nfe_speedup(),
                     res.trace.tokens_generated, res.trace.total_forwards);
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string ckpt;
  std::string task;
  std::string grid;
  std::size_t n = 200;
  std::uint64_t task_seed = 1000;
  std::string out;
  std::string svg;
  std::string traces;
  std::size_t workers = 0;
  bool deterministic = false;
};

// A task name inherits the training task's shape from the checkpoint.
SyntheticTask resolve_task(const EvalArgs& a, const json& meta) {
  if (fs::exists(a.task) || a.task.ends_with(".json")) return SyntheticTask::from_json(load_json(a.task));
  SyntheticTask t = meta.contains("task") ? SyntheticTask::from_json(meta["task"]) : SyntheticTask{};
  t.kind = parse_task_kind(a.task);
  t.seed = a.task_seed;
  t.validate();
  return t;
}

std::string trace_file_name(const EvalRow& row) { return row.variant + "_" + row.threshold + ".jsonl"; }

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const Loaded l = inspect_checkpoint(a.ckpt);
  const SyntheticTask task = resolve_task(a, l.meta);
  if (a.n == 0) throw ConfigError("--n must be positive");
  const EvalGrid grid = eval_grid_from_json(load_json(a.grid));
  const std::vector<TaskInstance> instances = gen_task(task, a.n);
  EvalOptions opt;
  opt.workers = a.workers ? a.workers : grid.workers;
  opt.deterministic = a.deterministic;
  EvalReport report;
  with_model(a.ckpt, l.f64,
             [&](const auto& model) { report = evaluate(model, l.tokenizer, instances, grid.samplers, opt); });

  if (a.out.empty()) {
    write_eval_csv(out, report);
  } else {
    std::ofstream f = open_out(a.out);
    write_eval_csv(f, report);
    out << "report " << a.out << "\n";
  }
  if (!a.svg.empty()) {
    std::ofstream f = open_out(a.svg);
    f << eval_svg(report, fmt::format("{} ({} instances)", to_string(task.kind), instances.size()));
  }
  if (!a.traces.empty()) {
    for (std::size_t r = 0; r < report.rows.size(); ++r) {
      std::ofstream f = open_out(fs::path(a.traces) / trace_file_name(report.rows[r]));
      for (std::size_t i = 0; i < report.traces[r].size(); ++i) write_trace_jsonl(f, report.traces[r][i], i);
    }
  }
  return 0;
}

// ---- roofline ----

int cmd_roofline(const std::string& spec_path, const std::string& out_dir, std::ostream& out) {
  const RooflineSpec spec = roofline_spec_from_json(load_json(spec_path));
  roofline::Calibration calib;
  if (spec.calibration) {
    calib = *spec.calibration;
  } else {
    const roofline::CalibrationResult r = roofline::calibrate(spec.hardware, spec.arch);
    calib = r.calibration;
    out << fmt::format("calibrated over {} candidates: {} (worst gating error {:.3f}%)\n", r.candidates,
                       calib.describe(), 100.0 * r.max_gating_error);
  }
  roofline::EmitOptions opt;
  opt.out_dir = out_dir;
  for (const fs::path& p : roofline::emit_tables(spec.hardware, spec.arch, calib, spec.grid, opt)) {
    out << p.string() << "\n";
  }
  return 0;
}

// ---- trace-report ----

int cmd_trace_report(const std::string& in_path, std::ostream& out) {
  std::ifstream in(in_path);
  if (!in) throw IoError("cannot open " + in_path);
  const std::vector<GenerationTrace> traces = read_trace_jsonl(in);
  std::size_t blocks = 0, tokens = 0, forwards = 0;
  double mean = 0.0, mean_stop = 0.0;
  std::map<std::size_t, std::size_t> reveals;
  for (const GenerationTrace& t : traces) {
    blocks += t.blocks.size();
    tokens += t.tokens_generated;
    forwards += t.total_forwards;
    mean += t.nfe_speedup();
    mean_stop += t.nfe_speedup_to_stop();
    for (const BlockTrace& b : t.blocks) {
      for (std::size_t n : b.revealed_per_forward) ++reveals[n];
    }
  }
  const double n = traces.empty() ? 1.0 : static_cast<double>(traces.size());
  out << fmt::format("generations {}\nblocks {}\ntokens {}\nforwards {}\n", traces.size(), blocks, tokens, forwards);
  out << fmt::format("mean_nfe_speedup {:.6f}\nmean_nfe_speedup_to_stop {:.6f}\n", mean / n, mean_stop / n);
  out << fmt::format("pooled_nfe_speedup {:.6f}\n",
                     forwards ? static_cast<double>(tokens) / static_cast<double>(forwards) : 0.0);
  out << "revealed_per_forward";
  for (const auto& [k, c] : reveals) out << fmt::format(" {}:{}", k, c);
  out << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Set block decoding: train, sample, evaluate and roofline tables", "sbd"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train a model from a JSON job file");
  train_cmd->add_option("--config", ta.config, "job file")->required();
  train_cmd->add_option("--checkpoint", ta.checkpoint, "override the checkpoint path");
  train_cmd->add_option("--log", ta.log, "override the CSV log path");

  SampleArgs sa;
  auto* sample_cmd = app.add_subcommand("sample", "decode one prompt");
  sample_cmd->add_option("--ckpt", sa.ckpt)->required();
  sample_cmd->add_option("--prompt", sa.prompt)->required();
  sample_cmd->add_option("--variant", sa.variant, "ntp, eb_entropy, eb_confidence or factor");
  sample_cmd->add_option("--gamma", sa.gamma);
  sample_cmd->add_option("--f", sa.f);
  sample_cmd->add_option("--factor-rule", sa.factor_rule, "literal or complement");
  sample_cmd->add_option("--k", sa.k);
  sample_cmd->add_option("--max-tokens", sa.max_tokens);
  sample_cmd->add_option("--temperature", sa.temperature);
  sample_cmd->add_option("--seed", sa.seed);
  sample_cmd->add_option("--stop", sa.stop, "stop symbols");
  sample_cmd->add_option("--trace", sa.trace, "write the block trace as JSONL");
  sample_cmd->add_flag("--no-cache", sa.no_cache, "recompute the prefix on every forward");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "score a sampler grid on a synthetic task");
  eval_cmd->add_option("--ckpt", ea.ckpt)->required();
  eval_cmd->add_option("--task", ea.task, "task name or task JSON file")->required();
  eval_cmd->add_option("--grid", ea.grid, "sampler grid JSON file")->required();
  eval_cmd->add_option("--n", ea.n, "instances");
  eval_cmd->add_option("--task-seed", ea.task_seed, "seed for a task given by name");
  eval_cmd->add_option("--out", ea.out, "CSV report path (default stdout)");
  eval_cmd->add_option("--svg", ea.svg, "accuracy vs speedup plot");
  eval_cmd->add_option("--traces", ea.traces, "directory for per-row trace JSONL");
  eval_cmd->add_option("--workers", ea.workers, "overrides the grid's worker count");
  eval_cmd->add_flag("--deterministic", ea.deterministic, "zero wall-clock columns");

  std::string spec, out_dir;
  auto* roof_cmd = app.add_subcommand("roofline", "emit slowdown and speedup tables");
  roof_cmd->add_option("--spec", spec)->required();
  roof_cmd->add_option("--out", out_dir)->required();

  std::string trace_in;
  auto* report_cmd = app.add_subcommand("trace-report", "summarise a trace JSONL file");
  report_cmd->add_option("--in", trace_in)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code != 0) err << app.help();
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train_cmd) return cmd_train(ta, out);
    if (*sample_cmd) return cmd_sample(sa, out);
    if (*eval_cmd) return cmd_eval(ea, out);
    if (*roof_cmd) return cmd_roofline(spec, out_dir, out);
    if (*report_cmd) return cmd_trace_report(trace_in, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"sbd"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace sbd
