#include "gmpo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace gmpo {

void TrainConfig::validate() const {
  if (group_size < 2) throw std::invalid_argument("config: group_size >= 2");
  if (prompts_per_round < 1)
    throw std::invalid_argument("config: prompts_per_round >= 1");
  if (inner_updates < 1)
    throw std::invalid_argument("config: inner_updates >= 1");
  if (total_rounds < 0) throw std::invalid_argument("config: total_rounds >= 0");
  if (sample_temperature < 0.0)
    throw std::invalid_argument("config: sample_temperature >= 0");
  if (policy_buckets < 1 || context_order < 0)
    throw std::invalid_argument("config: bad policy sizing");
  clip.validate();
}

std::vector<RolloutGroup> collect_round(const PolicySnapshot& old_snapshot,
                                        const Task& task,
                                        const TrainConfig& config, int round) {
  if (task.prompt_count() == 0)
    throw std::invalid_argument("collect_round: empty prompt set");

  const PolicyParams& params = old_snapshot.get();
  std::vector<RolloutGroup> groups;
  groups.reserve(config.prompts_per_round);

  for (int j = 0; j < config.prompts_per_round; ++j) {
    const int prompt_index =
        (round * config.prompts_per_round + j) % task.prompt_count();
    const Task::Prompt& prompt = task.prompt(prompt_index);

    RngStream rng(derive_seed(config.seed, 0xc011ec7, round, j));
    RolloutGroup group;
    for (int g = 0; g < config.group_size; ++g) {
      Rollout r = sample_rollout(params, prompt.id, task.eos_token(),
                                 task.max_len(), config.sample_temperature,
                                 rng);
      group.rewards.push_back(task.verify(prompt_index, r.tokens));
      group.rollouts.push_back(std::move(r));
    }
    group.advantages = normalize_group(group.rewards);
    groups.push_back(std::move(group));
  }
  return groups;
}

GradientStats accumulate_objective_gradient(const PolicyParams& params,
                                            std::span<const MinibatchItem> batch,
                                            ObjectiveKind kind,
                                            const ClipConfig& clip,
                                            GradTable& grad) {
  if (batch.empty())
    throw std::invalid_argument("gradient: empty minibatch");

  GradientStats stats;
  double value_acc = 0.0;
  int clipped_tokens = 0;

  for (const MinibatchItem& item : batch) {
    const Rollout& r = *item.rollout;
    std::vector<double> new_logps(r.tokens.size());
    for (std::size_t t = 0; t < r.tokens.size(); ++t)
      new_logps[t] = log_prob(params, r.buckets[t], r.tokens[t]);

    const ObjectiveResult res =
        rollout_objective(kind, new_logps, r, item.advantage, clip);
    value_acc += res.value;

    for (std::size_t t = 0; t < r.tokens.size(); ++t) {
      if (!r.mask[t]) continue;
      stats.valid_tokens++;
      if (res.clipped_flags[t]) clipped_tokens++;
      const double c = res.token_scores[t];
      if (c == 0.0) continue;
      const auto sc = score(params, r.buckets[t], r.tokens[t]);
      for (int v = 0; v < params.vocab_size; ++v)
        grad.at(r.buckets[t], v) += c * sc[v];
    }
  }

  // batch objective is the mean over rollouts; scale the gradient to match
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad.values) g *= inv_n;
  stats.objective_value = value_acc * inv_n;
  stats.clip_fraction =
      stats.valid_tokens
          ? static_cast<double>(clipped_tokens) / stats.valid_tokens
          : 0.0;
  return stats;
}

StepTelemetry inner_update(PolicyParams& params,
                           std::span<const MinibatchItem> batch,
                           const TrainConfig& config,
                           const PolicyParams& ref_params, double mean_reward,
                           int round, int update, GradTable& velocity) {
  // telemetry quantities are measured before the step
  std::vector<std::vector<double>> new_logps(batch.size());
  std::vector<const Rollout*> rollouts(batch.size());
  double entropy_acc = 0.0;
  std::size_t entropy_count = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Rollout& r = *batch[i].rollout;
    rollouts[i] = &r;
    new_logps[i].resize(r.tokens.size());
    for (std::size_t t = 0; t < r.tokens.size(); ++t) {
      new_logps[i][t] = log_prob(params, r.buckets[t], r.tokens[t]);
      if (r.mask[t]) {
        entropy_acc += entropy(params, r.buckets[t]);
        ++entropy_count;
      }
    }
  }

  StepTelemetry tel;
  tel.round = round;
  tel.update = update;
  std::tie(tel.ratio_log_min, tel.ratio_log_max) =
      ratio_envelope(new_logps, rollouts);
  tel.mean_entropy = entropy_count ? entropy_acc / entropy_count : 0.0;
  tel.kl_ref = kl_estimate(params, ref_params, rollouts);
  tel.mean_reward = mean_reward;

  GradTable grad = GradTable::zeros_like(params);
  const GradientStats stats = accumulate_objective_gradient(
      params, batch, config.objective, config.clip, grad);
  tel.clip_fraction = stats.clip_fraction;
  tel.objective_value = stats.objective_value;

  if (!grad.all_finite()) {
    std::ostringstream msg;
    msg << "non-finite gradient at round " << round << " update " << update
        << "; minibatch rollouts:";
    for (const MinibatchItem& item : batch) {
      msg << " [prompt " << item.rollout->prompt_id << " adv "
          << item.advantage << " tokens";
      for (int t : item.rollout->tokens) msg << ' ' << t;
      msg << ']';
    }
    throw std::runtime_error(msg.str());
  }

  if (config.momentum != 0.0) {
    for (std::size_t i = 0; i < grad.values.size(); ++i) {
      velocity.values[i] =
          config.momentum * velocity.values[i] + grad.values[i];
    }
    apply_gradient(params, velocity, config.step_size);
  } else {
    apply_gradient(params, grad, config.step_size);
  }
  return tel;
}

double greedy_pass_at_1(const PolicyParams& params, const Task& task) {
  RngStream unused(0);  // greedy decode consumes no randomness
  int hits = 0;
  for (int i = 0; i < task.prompt_count(); ++i) {
    Rollout r = sample_rollout(params, task.prompt(i).id, task.eos_token(),
                               task.max_len(), 0.0, unused);
    hits += task.verify(i, r.tokens) > 0.5 ? 1 : 0;
  }
  return static_cast<double>(hits) / task.prompt_count();
}

TrainResult train(const TrainConfig& config) {
  config.validate();
  const Task task = Task::make(config.task);

  TrainResult result;
  result.params = PolicyParams::zeros(config.policy_buckets, task.vocab_size(),
                                      config.context_order, config.seed);
  const PolicyParams ref_params = result.params;  // pre-RL reference
  GradTable velocity = GradTable::zeros_like(result.params);

  for (int round = 0; round < config.total_rounds; ++round) {
    const PolicySnapshot old_snapshot(result.params);
    const auto groups = collect_round(old_snapshot, task, config, round);

    double reward_acc = 0.0;
    std::size_t reward_count = 0;
    std::vector<MinibatchItem> items;
    for (const RolloutGroup& group : groups) {
      for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
        items.push_back({&group.rollouts[i], group.advantages[i]});
        reward_acc += group.rewards[i];
        ++reward_count;
      }
    }
    const double mean_reward = reward_acc / static_cast<double>(reward_count);
    result.final_mean_reward = mean_reward;

    // one shuffled pass over the round's data, split into contiguous
    // minibatches that cover every rollout exactly once
    RngStream shuffle_rng(derive_seed(config.seed, 0x51f, round));
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = shuffle_rng.uniform_int(i);
      std::swap(items[i - 1], items[j]);
    }

    const std::size_t n = items.size();
    for (int u = 0; u < config.inner_updates; ++u) {
      const std::size_t lo = n * u / config.inner_updates;
      const std::size_t hi = n * (u + 1) / config.inner_updates;
      if (lo == hi) continue;
      std::span<const MinibatchItem> batch(items.data() + lo, hi - lo);
      result.telemetry.push_back(inner_update(result.params, batch, config,
                                              ref_params, mean_reward, round,
                                              u, velocity));
    }
    // old policy syncs to current implicitly at the next round's snapshot
  }

  result.pass_at_1 = greedy_pass_at_1(result.params, task);
  return result;
}

}  // namespace gmpo
