#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gmpo/rng.hpp"

namespace gmpo {

enum class TaskKind { Copy, Parity };

// Task block of the experiment config.
struct TaskConfig {
  std::string name = "copy";      // "copy" | "parity"
  int alphabet = 2;               // symbols 0..alphabet-1; EOS = alphabet
  int target_min = 2;
  int target_max = 4;
  int prompt_count = 8;
  int max_len = 8;
  std::uint64_t seed = 0;
};

// Synthetic verifiable-reward token task. CopyTask rewards exact reproduction
// of a per-prompt target string; ParityTask rewards emitting exactly n bits
// with a required parity of ones.
class Task {
 public:
  struct Prompt {
    std::uint64_t id = 0;
    std::vector<int> target;  // CopyTask target
    int parity = 0;           // ParityTask: required parity of 1-bits
    int length = 0;           // required output length (both tasks)
  };

  static Task make(const TaskConfig& config);

  TaskKind kind() const { return kind_; }
  int vocab_size() const { return alphabet_ + 1; }
  int eos_token() const { return alphabet_; }
  int alphabet() const { return alphabet_; }
  int max_len() const { return max_len_; }
  int prompt_count() const { return static_cast<int>(prompts_.size()); }
  const Prompt& prompt(int index) const { return prompts_.at(index); }

  // Binary reward for a completed rollout. Tokens after (and including) the
  // first EOS are ignored; a truncated rollout is verified as-is.
  double verify(int prompt_index, std::span<const int> tokens) const;

 private:
  TaskKind kind_ = TaskKind::Copy;
  int alphabet_ = 2;
  int max_len_ = 8;
  std::vector<Prompt> prompts_;
};

struct UniformRewardEstimate {
  double value = 0.0;
  double std_error = 0.0;  // 0 for exact enumeration
  bool exact = true;
};

// Probability that a uniform random string of the prompt's required length
// (over the task alphabet, EOS appended) earns reward 1. Exact enumeration
// when alphabet^length <= 1e6, Monte-Carlo with standard error otherwise.
UniformRewardEstimate expected_uniform_reward(const Task& task,
                                              int prompt_index,
                                              int mc_samples = 200000,
                                              std::uint64_t mc_seed = 1);

}  // namespace gmpo
