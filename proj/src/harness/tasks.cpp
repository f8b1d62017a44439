#include "sbd/harness/tasks.hpp"

#include <algorithm>
#include <cctype>

#include "sbd/errors.hpp"
#include "sbd/numerics/random.hpp"

namespace sbd {

namespace {

constexpr std::string_view kLetters = "abcdefgh";

std::string letters(Rng& rng, std::size_t len, std::size_t alphabet) {
  std::string s;
  for (std::size_t i = 0; i < len; ++i) {
    s.push_back(kLetters[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(alphabet) - 1))]);
  }
  return s;
}

bool all_letters(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return kLetters.find(c) != std::string_view::npos; });
}

TaskInstance make_instance(TaskKind kind, const SyntheticTask& t, Rng& rng) {
  TaskInstance inst;
  inst.kind = kind;
  const auto len = static_cast<std::size_t>(
      uniform_int(rng, static_cast<std::int64_t>(t.min_len), static_cast<std::int64_t>(t.max_len)));
  switch (kind) {
    case TaskKind::Copy:
    case TaskKind::Reverse: {
      const std::string s = letters(rng, len, t.alphabet);
      inst.prompt = (kind == TaskKind::Copy ? "C" : "R") + s + ">";
      break;
    }
    case TaskKind::ModularArithmetic: {
      const auto a = uniform_int(rng, 0, kTaskModulus - 1);
      const auto b = uniform_int(rng, 0, kTaskModulus - 1);
      inst.prompt = "M" + std::to_string(a) + "+" + std::to_string(b) + "=";
      break;
    }
    case TaskKind::PatternCompletion: {
      const std::size_t unit = std::clamp<std::size_t>(len / 2, 2, 4);
      const std::string u = letters(rng, unit, t.alphabet);
      inst.prompt = "P" + u + u + u + ">";
      break;
    }
    case TaskKind::Mixed:
      throw std::logic_error("mixed is not an instance kind");
  }
  inst.answer = *solve(inst.prompt);
  return inst;
}

}  // namespace

std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::Copy: return "copy";
    case TaskKind::Reverse: return "reverse";
    case TaskKind::ModularArithmetic: return "modular";
    case TaskKind::PatternCompletion: return "pattern";
    case TaskKind::Mixed: return "mixed";
  }
  return "?";
}

TaskKind parse_task_kind(const std::string& text) {
  for (auto k : {TaskKind::Copy, TaskKind::Reverse, TaskKind::ModularArithmetic, TaskKind::PatternCompletion,
                 TaskKind::Mixed}) {
    if (text == to_string(k)) return k;
  }
  throw ConfigError("unknown task '" + text + "' (copy, reverse, modular, pattern, mixed)");
}

void SyntheticTask::validate() const {
  if (min_len < 1 || min_len > max_len) throw ConfigError("task lengths need 1 <= min_len <= max_len");
  if (alphabet < 2 || alphabet > kLetters.size()) throw ConfigError("task alphabet must be 2..8 letters");
}

nlohmann::json SyntheticTask::to_json() const {
  return {{"kind", to_string(kind)}, {"seed", seed},         {"min_len", min_len},
          {"max_len", max_len},      {"alphabet", alphabet}};
}

SyntheticTask SyntheticTask::from_json(const nlohmann::json& j) {
  SyntheticTask t;
  try {
    if (j.contains("kind")) t.kind = parse_task_kind(j["kind"].get<std::string>());
    t.seed = j.value("seed", t.seed);
    t.min_len = j.value("min_len", t.min_len);
    t.max_len = j.value("max_len", t.max_len);
    t.alphabet = j.value("alphabet", t.alphabet);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("task: ") + e.what());
  }
  t.validate();
  return t;
}

const Tokenizer& task_tokenizer() {
  static const Tokenizer t = [] {
    std::vector<std::string> symbols;
    for (char c : std::string_view(".>+=CRMP0123456789abcdefgh")) symbols.emplace_back(1, c);
    return Tokenizer::char_level(std::move(symbols));
  }();
  return t;
}

std::vector<TaskInstance> gen_task(const SyntheticTask& task, std::size_t n) {
  task.validate();
  if (n == 0) throw ConfigError("gen_task needs n >= 1");
  Rng rng(task.seed);
  std::vector<TaskInstance> out;
  out.reserve(n);
  static constexpr TaskKind kinds[] = {TaskKind::Copy, TaskKind::Reverse, TaskKind::ModularArithmetic,
                                       TaskKind::PatternCompletion};
  for (std::size_t i = 0; i < n; ++i) {
    const TaskKind kind = task.kind == TaskKind::Mixed ? kinds[uniform_int(rng, 0, 3)] : task.kind;
    out.push_back(make_instance(kind, task, rng));
  }
  return out;
}

std::optional<std::string> solve(const std::string& prompt) {
  if (prompt.size() < 3) return std::nullopt;
  const char kind = prompt.front();
  const std::string_view body(prompt.data() + 1, prompt.size() - 2);
  const char last = prompt.back();
  switch (kind) {
    case 'C':
      if (last != '>' || !all_letters(body)) return std::nullopt;
      return std::string(body) + kAnswerEnd;
    case 'R':
      if (last != '>' || !all_letters(body)) return std::nullopt;
      return std::string(body.rbegin(), body.rend()) + kAnswerEnd;
    case 'M': {
      // "M<a>+<b>=" with single digits.
      if (last != '=' || body.size() != 3 || body[1] != '+') return std::nullopt;
      if (!std::isdigit(static_cast<unsigned char>(body[0])) || !std::isdigit(static_cast<unsigned char>(body[2]))) {
        return std::nullopt;
      }
      return std::to_string(((body[0] - '0') + (body[2] - '0')) % kTaskModulus) + kAnswerEnd;
    }
    case 'P': {
      if (last != '>' || !all_letters(body) || body.size() % 3 != 0) return std::nullopt;
      const std::string_view u = body.substr(0, body.size() / 3);
      if (body.substr(u.size(), u.size()) != u || body.substr(2 * u.size()) != u) return std::nullopt;
      return std::string(u) + kAnswerEnd;
    }
    default:
      return std::nullopt;
  }
}

bool check_answer(const std::string& prompt, const std::string& output) {
  const auto want = solve(prompt);
  if (!want) return false;
  const std::size_t end = output.find(kAnswerEnd);
  if (end == std::string::npos) return false;
  return output.substr(0, end + 1) == *want;
}

Corpus task_corpus(const SyntheticTask& task, std::size_t n) {
  Corpus c;
  c.tokenizer = task_tokenizer();
  std::string text;
  for (const TaskInstance& inst : gen_task(task, n)) text += inst.prompt + inst.answer;
  c.tokens = c.tokenizer.encode(text);
  c.provenance = {{"source", "synthetic"}, {"task", task.to_json()}, {"instances", n}};
  return c;
}

}  // namespace sbd
