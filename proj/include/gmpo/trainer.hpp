#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gmpo/core.hpp"
#include "gmpo/env.hpp"
#include "gmpo/objectives.hpp"
#include "gmpo/policy.hpp"
#include "gmpo/telemetry.hpp"

namespace gmpo {

struct TrainConfig {
  int group_size = 8;
  int prompts_per_round = 128;
  int inner_updates = 8;
  double step_size = 0.5;
  double momentum = 0.0;
  int total_rounds = 40;
  double sample_temperature = 1.0;
  ObjectiveKind objective = ObjectiveKind::Gmpo;
  ClipConfig clip = ClipConfig::token_log(-0.4, 0.4);
  std::uint64_t seed = 1;
  int policy_buckets = 4096;
  int context_order = 2;
  TaskConfig task;

  void validate() const;
};

// One rollout of a round's collection together with its group advantage.
struct MinibatchItem {
  const Rollout* rollout = nullptr;
  double advantage = 0.0;
};

// Sample G rollouts per prompt from the frozen snapshot, score them and fill
// group advantages. Prompts are cycled deterministically through the prompt
// set; every (round, slot) pair owns its rng stream, so collection order
// never changes the draws.
std::vector<RolloutGroup> collect_round(const PolicySnapshot& old_snapshot,
                                        const Task& task,
                                        const TrainConfig& config, int round);

struct GradientStats {
  double objective_value = 0.0;
  double clip_fraction = 0.0;
  int valid_tokens = 0;
};

// Exact analytic gradient of the batch objective w.r.t. every logit:
// sum over rollouts and tokens of c_t * score(bucket_t, token_t).
GradientStats accumulate_objective_gradient(const PolicyParams& params,
                                            std::span<const MinibatchItem> batch,
                                            ObjectiveKind kind,
                                            const ClipConfig& clip,
                                            GradTable& grad);

// Recompute new log-probs under `params`, take one ascent step on the batch
// objective, and record telemetry. `velocity` carries the optional momentum
// state between updates. Throws on a non-finite gradient with a diagnostic
// dump of the offending rollout.
StepTelemetry inner_update(PolicyParams& params,
                           std::span<const MinibatchItem> batch,
                           const TrainConfig& config,
                           const PolicyParams& ref_params, double mean_reward,
                           int round, int update, GradTable& velocity);

struct TrainResult {
  PolicyParams params;
  std::vector<StepTelemetry> telemetry;
  double final_mean_reward = 0.0;
  double pass_at_1 = 0.0;
};

TrainResult train(const TrainConfig& config);

// Greedy (temperature 0) Pass@1 over the whole prompt set.
double greedy_pass_at_1(const PolicyParams& params, const Task& task);

}  // namespace gmpo
