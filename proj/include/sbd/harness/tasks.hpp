#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbd/harness/corpus.hpp"

namespace sbd {

enum class TaskKind { Copy, Reverse, ModularArithmetic, PatternCompletion, Mixed };

std::string to_string(TaskKind k);
TaskKind parse_task_kind(const std::string& text);

// Instances are plain strings over task_tokenizer(): a kind marker (C, R, M,
// P), the body, then the answer terminated by '.'.
//   Copy     "Cabc>"  -> "abc."
//   Reverse  "Rabc>"  -> "cba."
//   Modular  "M3+5="  -> "1."   (mod 7)
//   Pattern  "Pabcabcabc>" -> "abc."  (a unit shown three times, asked once more)
struct SyntheticTask {
  TaskKind kind = TaskKind::Copy;
  std::uint64_t seed = 0;
  std::size_t min_len = 3;
  std::size_t max_len = 8;
  // Letters drawn from the first `alphabet` of a..h.
  std::size_t alphabet = 8;

  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticTask from_json(const nlohmann::json& j);
};

struct TaskInstance {
  TaskKind kind = TaskKind::Copy;
  std::string prompt;
  // Includes the terminating '.'.
  std::string answer;
};

inline constexpr char kAnswerEnd = '.';
inline constexpr int kTaskModulus = 7;

const Tokenizer& task_tokenizer();

std::vector<TaskInstance> gen_task(const SyntheticTask& task, std::size_t n);

// The unique answer implied by a prompt, or nullopt for a malformed prompt.
std::optional<std::string> solve(const std::string& prompt);

// Exact match of `output` (cut after the first '.') against solve(prompt).
bool check_answer(const std::string& prompt, const std::string& output);

// Concatenation of prompt + answer for n instances.
Corpus task_corpus(const SyntheticTask& task, std::size_t n);

}  // namespace sbd
