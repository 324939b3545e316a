#include "gmpo/env.hpp"

#include <cmath>
#include <stdexcept>

namespace gmpo {

Task Task::make(const TaskConfig& config) {
  if (config.alphabet < 2)
    throw std::invalid_argument("task: alphabet must be >= 2");
  if (config.target_min < 1 || config.target_max < config.target_min)
    throw std::invalid_argument("task: bad target length range");
  if (config.target_max + 1 > config.max_len)
    throw std::invalid_argument("task: max_len too short for target + EOS");
  if (config.prompt_count < 1)
    throw std::invalid_argument("task: need at least one prompt");

  Task task;
  task.alphabet_ = config.alphabet;
  task.max_len_ = config.max_len;
  if (config.name == "copy") {
    task.kind_ = TaskKind::Copy;
  } else if (config.name == "parity") {
    if (config.alphabet != 2)
      throw std::invalid_argument("parity task: alphabet must be 2");
    task.kind_ = TaskKind::Parity;
  } else {
    throw std::invalid_argument("unknown task: " + config.name);
  }

  const int span = config.target_max - config.target_min + 1;
  for (int i = 0; i < config.prompt_count; ++i) {
    RngStream rng(derive_seed(config.seed, 0xa5c0de, i));
    Prompt p;
    p.id = derive_seed(config.seed, 0x9d, i);
    p.length = config.target_min + static_cast<int>(rng.uniform_int(span));
    if (task.kind_ == TaskKind::Copy) {
      for (int t = 0; t < p.length; ++t)
        p.target.push_back(static_cast<int>(rng.uniform_int(config.alphabet)));
    } else {
      p.parity = static_cast<int>(rng.uniform_int(2));
    }
    task.prompts_.push_back(std::move(p));
  }
  return task;
}

double Task::verify(int prompt_index, std::span<const int> tokens) const {
  const Prompt& p = prompts_.at(prompt_index);

  // body = tokens before the first EOS
  std::size_t body_len = 0;
  while (body_len < tokens.size() && tokens[body_len] != eos_token())
    ++body_len;

  if (static_cast<int>(body_len) != p.length) return 0.0;

  if (kind_ == TaskKind::Copy) {
    for (std::size_t t = 0; t < body_len; ++t)
      if (tokens[t] != p.target[t]) return 0.0;
    return 1.0;
  }

  int ones = 0;
  for (std::size_t t = 0; t < body_len; ++t) ones += tokens[t];
  return (ones % 2) == p.parity ? 1.0 : 0.0;
}

UniformRewardEstimate expected_uniform_reward(const Task& task,
                                              int prompt_index,
                                              int mc_samples,
                                              std::uint64_t mc_seed) {
  const int n = task.prompt(prompt_index).length;
  const int a = task.alphabet();

  double total_outcomes = std::pow(static_cast<double>(a), n);
  UniformRewardEstimate est;

  if (total_outcomes <= 1e6) {
    // exact enumeration of all a^n strings, EOS appended
    std::vector<int> tokens(n + 1, 0);
    tokens[n] = task.eos_token();
    const std::uint64_t count = static_cast<std::uint64_t>(total_outcomes);
    std::uint64_t hits = 0;
    for (std::uint64_t code = 0; code < count; ++code) {
      std::uint64_t c = code;
      for (int t = 0; t < n; ++t) {
        tokens[t] = static_cast<int>(c % a);
        c /= a;
      }
      hits += task.verify(prompt_index, tokens) > 0.5 ? 1 : 0;
    }
    est.value = static_cast<double>(hits) / total_outcomes;
    est.exact = true;
    return est;
  }

  if (mc_samples < 1)
    throw std::invalid_argument("expected_uniform_reward: mc_samples >= 1");
  RngStream rng(derive_seed(mc_seed, 0x3c, prompt_index));
  std::vector<int> tokens(n + 1, 0);
  tokens[n] = task.eos_token();
  std::uint64_t hits = 0;
  for (int s = 0; s < mc_samples; ++s) {
    for (int t = 0; t < n; ++t)
      tokens[t] = static_cast<int>(rng.uniform_int(a));
    hits += task.verify(prompt_index, tokens) > 0.5 ? 1 : 0;
  }
  const double p = static_cast<double>(hits) / mc_samples;
  est.value = p;
  est.std_error = std::sqrt(p * (1.0 - p) / mc_samples);
  est.exact = false;
  return est;
}

}  // namespace gmpo
