#include "gmpo/objectives.hpp"

#include <cmath>
#include <stdexcept>

namespace gmpo {

namespace {

void check_inputs(std::span<const double> new_logps, const Rollout& rollout) {
  if (new_logps.size() != rollout.tokens.size())
    throw std::invalid_argument("objective: new_logps length mismatch");
  rollout.validate();
  for (double lp : new_logps) {
    if (!std::isfinite(lp))
      throw std::invalid_argument("objective: non-finite new log-prob");
  }
}

}  // namespace

ObjectiveResult grpo_rollout_objective(std::span<const double> new_logps,
                                       const Rollout& rollout,
                                       double advantage,
                                       const ClipConfig& clip) {
  check_inputs(new_logps, rollout);
  if (clip.mode == ClipMode::Sequence)
    throw std::invalid_argument("grpo objective: sequence clipping unsupported");

  const std::size_t len = rollout.tokens.size();
  const double lo = std::exp(clip.lower_log);
  const double hi = std::exp(clip.upper_log);
  const int n = rollout.valid_count();

  ObjectiveResult res;
  res.token_scores.assign(len, 0.0);
  res.clipped_flags.assign(len, 0);

  double acc = 0.0;
  for (std::size_t t = 0; t < len; ++t) {
    if (!rollout.mask[t]) continue;
    const double d = new_logps[t] - rollout.old_logps[t];
    const double rho = std::exp(d);
    const double clamped = std::min(std::max(rho, lo), hi);
    const double unclipped_term = rho * advantage;
    const double clipped_term = clamped * advantage;
    if (clipped_term < unclipped_term) {
      acc += clipped_term;
      res.clipped_flags[t] = 1;
      res.ratio_log_sum += std::log(clamped);
    } else {
      acc += unclipped_term;
      res.token_scores[t] = advantage * rho / n;
      res.ratio_log_sum += d;
    }
  }
  res.value = acc / n;
  return res;
}

namespace {

// Shared core of the three geometric variants with token-level clipping.
// normalize=false drops the 1/|o| exponent.
ObjectiveResult gmpo_core(std::span<const double> new_logps,
                          const Rollout& rollout, double advantage,
                          const ClipConfig& clip, bool normalize) {
  check_inputs(new_logps, rollout);
  if (clip.mode == ClipMode::Sequence)
    throw std::invalid_argument("gmpo objective: use the seqclip variant");

  const std::size_t len = rollout.tokens.size();
  const double s = sgn(advantage);
  const int n = rollout.valid_count();

  ObjectiveResult res;
  res.token_scores.assign(len, 0.0);
  res.clipped_flags.assign(len, 0);

  double log_sum = 0.0;
  for (std::size_t t = 0; t < len; ++t) {
    if (!rollout.mask[t]) continue;
    const double d = new_logps[t] - rollout.old_logps[t];
    const double sd = s * d;
    // min with the clamp: only the upper bound bites in sgn-space
    if (clip.mode == ClipMode::Token && sd > clip.upper_log) {
      log_sum += s * clip.upper_log;
      res.clipped_flags[t] = 1;
    } else {
      log_sum += d;
    }
  }
  res.ratio_log_sum = log_sum;
  res.value = advantage *
              std::exp(normalize ? log_sum / n : log_sum);
  const double coeff = normalize ? res.value / n : res.value;
  for (std::size_t t = 0; t < len; ++t) {
    if (rollout.mask[t] && !res.clipped_flags[t]) res.token_scores[t] = coeff;
  }
  return res;
}

}  // namespace

ObjectiveResult gmpo_rollout_objective(std::span<const double> new_logps,
                                       const Rollout& rollout,
                                       double advantage,
                                       const ClipConfig& clip) {
  return gmpo_core(new_logps, rollout, advantage, clip, /*normalize=*/true);
}

ObjectiveResult gmpo_nonorm_rollout_objective(std::span<const double> new_logps,
                                              const Rollout& rollout,
                                              double advantage,
                                              const ClipConfig& clip) {
  return gmpo_core(new_logps, rollout, advantage, clip, /*normalize=*/false);
}

ObjectiveResult gmpo_seqclip_rollout_objective(std::span<const double> new_logps,
                                               const Rollout& rollout,
                                               double advantage,
                                               const ClipConfig& clip) {
  check_inputs(new_logps, rollout);
  if (clip.mode != ClipMode::Sequence)
    throw std::invalid_argument("seqclip objective: clip.mode must be sequence");

  const std::size_t len = rollout.tokens.size();
  const double s = sgn(advantage);
  const int n = rollout.valid_count();

  double log_sum = 0.0;
  for (std::size_t t = 0; t < len; ++t) {
    if (rollout.mask[t]) log_sum += new_logps[t] - rollout.old_logps[t];
  }

  ObjectiveResult res;
  res.token_scores.assign(len, 0.0);
  res.clipped_flags.assign(len, 0);

  const double ss = s * log_sum;
  const bool seq_clipped = ss > clip.upper_log;
  const double m = seq_clipped ? s * clip.upper_log : log_sum;
  res.ratio_log_sum = m;
  res.value = advantage * std::exp(m / n);
  for (std::size_t t = 0; t < len; ++t) {
    if (!rollout.mask[t]) continue;
    if (seq_clipped) {
      res.clipped_flags[t] = 1;  // the whole sequence loses its gradient
    } else {
      res.token_scores[t] = res.value / n;
    }
  }
  return res;
}

ObjectiveResult rollout_objective(ObjectiveKind kind,
                                  std::span<const double> new_logps,
                                  const Rollout& rollout, double advantage,
                                  const ClipConfig& clip) {
  switch (kind) {
    case ObjectiveKind::Grpo:
      return grpo_rollout_objective(new_logps, rollout, advantage, clip);
    case ObjectiveKind::Gmpo:
      return gmpo_rollout_objective(new_logps, rollout, advantage, clip);
    case ObjectiveKind::GmpoNoClip:
      return gmpo_rollout_objective(new_logps, rollout, advantage,
                                    ClipConfig::none());
    case ObjectiveKind::GmpoSeqClip:
      return gmpo_seqclip_rollout_objective(new_logps, rollout, advantage,
                                            clip);
    case ObjectiveKind::GmpoNoNorm:
      return gmpo_nonorm_rollout_objective(new_logps, rollout, advantage,
                                           clip);
  }
  throw std::logic_error("unknown objective kind");
}

double batch_objective(
    std::span<const RolloutGroup> groups,
    std::span<const std::vector<std::vector<double>>> new_logps_per_group,
    ObjectiveKind kind, const ClipConfig& clip) {
  if (groups.size() != new_logps_per_group.size())
    throw std::invalid_argument("batch_objective: group count mismatch");
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    if (group.rollouts.size() != new_logps_per_group[g].size() ||
        group.rollouts.size() != group.advantages.size())
      throw std::invalid_argument("batch_objective: rollout count mismatch");
    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
      acc += rollout_objective(kind, new_logps_per_group[g][i],
                               group.rollouts[i], group.advantages[i], clip)
                 .value;
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("batch_objective: empty batch");
  return acc / static_cast<double>(count);
}

GradientWeights gradient_weight_comparison(std::span<const double> ratios) {
  if (ratios.empty())
    throw std::invalid_argument("gradient_weight_comparison: empty input");
  GradientWeights w;
  w.grpo_weights.reserve(ratios.size());
  double log_sum = 0.0;
  for (double rho : ratios) {
    if (!(rho > 0.0) || !std::isfinite(rho))
      throw std::invalid_argument("gradient_weight_comparison: ratios must be > 0");
    w.grpo_weights.push_back(rho);
    log_sum += std::log(rho);
  }
  w.gmpo_weight = std::exp(log_sum / static_cast<double>(ratios.size()));
  return w;
}

}  // namespace gmpo
