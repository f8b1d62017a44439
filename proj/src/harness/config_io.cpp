#include "sbd/harness/config_io.hpp"

#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <string_view>

#include "sbd/errors.hpp"

namespace sbd {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (std::string_view a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::vector<double> number_list(const json& v, const std::string& where) {
  try {
    if (v.is_array()) return v.get<std::vector<double>>();
    return {v.get<double>()};
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::optional<std::uint64_t> env_seed_override() {
  const char* v = std::getenv("SBD_SEED");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(v, &end, 10);
  if (*end != '\0' || v[0] == '-') throw ConfigError(std::string("SBD_SEED is not an unsigned integer: ") + v);
  return static_cast<std::uint64_t>(s);
}

json to_json(const TrainConfig& c) {
  json j;
  j["model"] = c.model;
  j["k_min"] = c.k_min;
  j["k_max"] = c.k_max;
  j["steps"] = c.steps;
  j["batch_size"] = c.batch_size;
  j["seq_len"] = c.seq_len;
  j["epochs"] = c.epochs;
  j["lr"] = c.lr;
  j["warmup_steps"] = c.warmup_steps;
  j["min_lr_ratio"] = c.min_lr_ratio;
  j["beta1"] = c.optim.beta1;
  j["beta2"] = c.optim.beta2;
  j["eps"] = c.optim.eps;
  j["weight_decay"] = c.optim.weight_decay;
  j["grad_clip"] = c.optim.grad_clip;
  j["ntp_weight"] = c.weights.ntp;
  j["matp_weight"] = c.weights.matp;
  j["loss_mode"] = to_string(c.loss_mode);
  j["seed"] = c.seed;
  j["precision"] = c.precision;
  j["deterministic"] = c.deterministic;
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  const std::string w = "train";
  check_keys(j,
             {"model", "k_min", "k_max", "steps", "batch_size", "seq_len", "epochs", "lr", "warmup_steps",
              "min_lr_ratio", "beta1", "beta2", "eps", "weight_decay", "grad_clip", "ntp_weight", "matp_weight",
              "loss_mode", "seed", "precision", "deterministic"},
             w);
  TrainConfig c;
  if (j.contains("model")) {
    check_keys(j["model"],
               {"vocab_size", "d_model", "n_layers", "n_heads", "d_ff", "max_seq_len", "rope_base", "use_rope",
                "norm_eps"},
               w + ".model");
    try {
      c.model = j["model"].get<ModelConfig>();
    } catch (const json::exception& e) {
      throw ConfigError(w + ".model: " + e.what());
    }
  }
  read(j, "k_min", c.k_min, w);
  read(j, "k_max", c.k_max, w);
  read(j, "steps", c.steps, w);
  read(j, "batch_size", c.batch_size, w);
  read(j, "seq_len", c.seq_len, w);
  read(j, "epochs", c.epochs, w);
  read(j, "lr", c.lr, w);
  read(j, "warmup_steps", c.warmup_steps, w);
  read(j, "min_lr_ratio", c.min_lr_ratio, w);
  read(j, "beta1", c.optim.beta1, w);
  read(j, "beta2", c.optim.beta2, w);
  read(j, "eps", c.optim.eps, w);
  read(j, "weight_decay", c.optim.weight_decay, w);
  read(j, "grad_clip", c.optim.grad_clip, w);
  read(j, "ntp_weight", c.weights.ntp, w);
  read(j, "matp_weight", c.weights.matp, w);
  std::string mode = to_string(c.loss_mode);
  read(j, "loss_mode", mode, w);
  c.loss_mode = parse_loss_mode(mode);
  read(j, "seed", c.seed, w);
  read(j, "precision", c.precision, w);
  read(j, "deterministic", c.deterministic, w);
  if (auto s = env_seed_override()) c.seed = *s;
  c.validate();
  return c;
}

Corpus CorpusSpec::load() const {
  if (task) return task_corpus(*task, instances);
  if (path.empty()) throw ConfigError("corpus needs either a task or a path");
  return ingest(path, tokenizer);
}

TrainJob train_job_from_json(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, {"train", "corpus", "checkpoint", "log"}, "job");
  TrainJob job;
  job.train = train_config_from_json(j.value("train", json::object()));
  const json corpus = j.value("corpus", json::object());
  check_keys(corpus, {"task", "instances", "path", "tokenizer"}, "corpus");
  if (corpus.contains("task")) {
    json task = corpus["task"];
    if (task.is_string()) task = json{{"kind", task}};
    job.corpus.task = SyntheticTask::from_json(task);
    if (auto s = env_seed_override()) job.corpus.task->seed = *s;
  }
  read(corpus, "instances", job.corpus.instances, "corpus");
  std::string path, tok = to_string(job.corpus.tokenizer);
  read(corpus, "path", path, "corpus");
  read(corpus, "tokenizer", tok, "corpus");
  job.corpus.path = resolve(base_dir, path);
  job.corpus.tokenizer = parse_tokenizer_kind(tok);
  std::string ckpt = job.checkpoint.string(), log;
  read(j, "checkpoint", ckpt, "job");
  read(j, "log", log, "job");
  job.checkpoint = resolve(base_dir, ckpt);
  job.log_csv = resolve(base_dir, log);
  return job;
}

TrainJob load_train_job(const std::filesystem::path& path) {
  return train_job_from_json(load_json(path), path.parent_path());
}

json to_json(const roofline::Calibration& c) {
  return {{"bytes_per_weight", c.bytes_per_weight},
          {"bandwidth_scale", c.bandwidth_scale},
          {"activations", c.activations == roofline::ActivationTraffic::None ? "none" : "io"},
          {"attention_scope", c.scope == roofline::AttentionScope::Model ? "model" : "head"}};
}

RooflineSpec roofline_spec_from_json(const json& j) {
  check_keys(j, {"hardware", "arch", "calibration", "grid"}, "roofline");
  RooflineSpec s;
  if (j.contains("hardware")) {
    const json& h = j["hardware"];
    check_keys(h, {"peak_flops", "memory_bandwidth", "label"}, "hardware");
    read(h, "peak_flops", s.hardware.peak_flops, "hardware");
    read(h, "memory_bandwidth", s.hardware.memory_bandwidth, "hardware");
    read(h, "label", s.hardware.label, "hardware");
  }
  if (j.contains("arch")) {
    const json& a = j["arch"];
    check_keys(a,
               {"n_layers", "d_model", "n_heads", "n_kv_heads", "head_dim", "d_ff", "vocab_size", "bytes_per_weight",
                "bytes_per_kv_element", "bytes_per_activation"},
               "arch");
    read(a, "n_layers", s.arch.n_layers, "arch");
    read(a, "d_model", s.arch.d_model, "arch");
    read(a, "n_heads", s.arch.n_heads, "arch");
    read(a, "n_kv_heads", s.arch.n_kv_heads, "arch");
    read(a, "head_dim", s.arch.head_dim, "arch");
    read(a, "d_ff", s.arch.d_ff, "arch");
    read(a, "vocab_size", s.arch.vocab_size, "arch");
    read(a, "bytes_per_weight", s.arch.bytes_per_weight, "arch");
    read(a, "bytes_per_kv_element", s.arch.bytes_per_kv_element, "arch");
    read(a, "bytes_per_activation", s.arch.bytes_per_activation, "arch");
  }
  if (j.contains("calibration")) {
    const json& c = j["calibration"];
    check_keys(c, {"bytes_per_weight", "bandwidth_scale", "activations", "attention_scope"}, "calibration");
    roofline::Calibration cal = roofline::default_calibration();
    read(c, "bytes_per_weight", cal.bytes_per_weight, "calibration");
    read(c, "bandwidth_scale", cal.bandwidth_scale, "calibration");
    std::string act = "io", scope = "head";
    read(c, "activations", act, "calibration");
    read(c, "attention_scope", scope, "calibration");
    if (act != "io" && act != "none") throw ConfigError("calibration.activations must be io or none");
    if (scope != "head" && scope != "model") throw ConfigError("calibration.attention_scope must be head or model");
    cal.activations = act == "io" ? roofline::ActivationTraffic::InputOutput : roofline::ActivationTraffic::None;
    cal.scope = scope == "head" ? roofline::AttentionScope::Head : roofline::AttentionScope::Model;
    s.calibration = cal;
  }
  if (j.contains("grid")) {
    const json& g = j["grid"];
    check_keys(g, {"kv_lengths", "block_sizes", "batches", "speedup_block_sizes", "speedup_batches", "nfe_speedups"},
               "grid");
    read(g, "kv_lengths", s.grid.kv_lengths, "grid");
    read(g, "block_sizes", s.grid.block_sizes, "grid");
    read(g, "batches", s.grid.batches, "grid");
    read(g, "speedup_block_sizes", s.grid.speedup_block_sizes, "grid");
    read(g, "speedup_batches", s.grid.speedup_batches, "grid");
    read(g, "nfe_speedups", s.grid.nfe_speedups, "grid");
  }
  s.hardware.validate();
  s.arch.validate();
  return s;
}

EvalGrid eval_grid_from_json(const json& j) {
  check_keys(j, {"k", "max_tokens", "temperature", "seed", "use_cache", "workers", "samplers"}, "grid");
  SamplerConfig base;
  read(j, "k", base.k, "grid");
  read(j, "max_tokens", base.max_tokens, "grid");
  read(j, "temperature", base.temperature, "grid");
  read(j, "seed", base.seed, "grid");
  read(j, "use_cache", base.use_cache, "grid");
  if (auto s = env_seed_override()) base.seed = *s;
  EvalGrid grid;
  read(j, "workers", grid.workers, "grid");
  if (grid.workers == 0) throw ConfigError("grid.workers must be positive");
  if (!j.contains("samplers") || !j["samplers"].is_array()) throw ConfigError("grid.samplers must be a list");
  for (const json& e : j["samplers"]) {
    check_keys(e, {"variant", "gamma", "f", "factor_rule", "k", "max_tokens", "temperature"}, "grid.samplers");
    SamplerConfig s = base;
    std::string variant;
    read(e, "variant", variant, "grid.samplers");
    s.variant = parse_variant(variant);
    read(e, "k", s.k, "grid.samplers");
    read(e, "max_tokens", s.max_tokens, "grid.samplers");
    read(e, "temperature", s.temperature, "grid.samplers");
    std::string rule = "literal";
    read(e, "factor_rule", rule, "grid.samplers");
    if (rule != "literal" && rule != "complement") throw ConfigError("factor_rule must be literal or complement");
    s.factor_rule = rule == "literal" ? FactorRule::Literal : FactorRule::Complement;
    std::vector<double> values{0.0};
    if (s.variant == SamplerVariant::Factor) {
      if (!e.contains("f")) throw ConfigError("factor sampler needs f");
      values = number_list(e["f"], "grid.samplers.f");
    } else if (s.variant != SamplerVariant::NTP) {
      values = e.contains("gamma") ? number_list(e["gamma"], "grid.samplers.gamma") : std::vector<double>{base.gamma};
    }
    for (double v : values) {
      SamplerConfig one = s;
      if (s.variant == SamplerVariant::Factor) {
        one.f = v;
      } else {
        one.gamma = v;
      }
      one.validate();
      grid.samplers.push_back(one);
    }
  }
  return grid;
}

}  // namespace sbd
