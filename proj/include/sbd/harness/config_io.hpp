#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "sbd/harness/tasks.hpp"
#include "sbd/inference/select.hpp"
#include "sbd/roofline/tables.hpp"
#include "sbd/training/trainer.hpp"

namespace sbd {

// All loaders throw ConfigError for missing files, malformed JSON, unknown
// keys and out-of-range values.
nlohmann::json load_json(const std::filesystem::path& path);

// SBD_SEED, when set to an unsigned integer, replaces every config seed.
std::optional<std::uint64_t> env_seed_override();

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Where training tokens come from: a synthetic task or a text file.
struct CorpusSpec {
  std::optional<SyntheticTask> task;
  std::size_t instances = 20000;
  std::filesystem::path path;
  TokenizerKind tokenizer = TokenizerKind::CharLevel;

  Corpus load() const;
};

struct TrainJob {
  TrainConfig train;
  CorpusSpec corpus;
  std::filesystem::path checkpoint = "model.sbd";
  std::filesystem::path log_csv;
};

// {"train": {...}, "corpus": {...}, "checkpoint": "...", "log": "..."};
// relative paths resolve against the config file's directory.
TrainJob load_train_job(const std::filesystem::path& path);
TrainJob train_job_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

struct RooflineSpec {
  roofline::HardwareSpec hardware;
  roofline::ArchSpec arch;
  // Absent: run the calibration sweep.
  std::optional<roofline::Calibration> calibration;
  roofline::TableGrid grid;
};

RooflineSpec roofline_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const roofline::Calibration& c);

struct EvalGrid {
  std::vector<SamplerConfig> samplers;
  std::size_t workers = 1;
};

// {"k":8, "max_tokens":16, "temperature":0, "seed":0, "use_cache":true,
//  "workers":1, "samplers":[{"variant":"ntp"}, {"variant":"eb_entropy",
//  "gamma":[0,0.1]}, {"variant":"factor","f":[2.5],"factor_rule":"literal"}]}
// Entries inherit the top-level settings; list-valued gamma or f expand into
// one sampler per value.
EvalGrid eval_grid_from_json(const nlohmann::json& j);

}  // namespace sbd
