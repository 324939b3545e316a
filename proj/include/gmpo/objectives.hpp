#pragma once

#include <span>
#include <vector>

#include "gmpo/core.hpp"

namespace gmpo {

// Per-rollout surrogate value plus the exact per-token gradient coefficients:
// dJ/dtheta = sum_t token_scores[t] * dlogpi(o_t|.)/dtheta. Clipped tokens
// carry a zero score.
struct ObjectiveResult {
  double value = 0.0;
  std::vector<double> token_scores;
  std::vector<std::uint8_t> clipped_flags;
  double ratio_log_sum = 0.0;  // sum over valid tokens of the post-min log-ratio
};

// Arithmetic-mean clipped surrogate:
// (1/n) sum_t min(rho_t * A, clip(rho_t, 1-eps, 1+eps) * A).
ObjectiveResult grpo_rollout_objective(std::span<const double> new_logps,
                                       const Rollout& rollout,
                                       double advantage,
                                       const ClipConfig& clip);

// Geometric-mean surrogate, evaluated in log space. With s = sgn(A) and
// d_t = new - old, each token contributes m_t = s * min(s*d_t, clamp(s*d_t,
// L, U)); value = A * exp(mean of m_t over valid tokens). Only the upper
// bound bites in sgn-space, so clipping is pessimistic.
ObjectiveResult gmpo_rollout_objective(std::span<const double> new_logps,
                                       const Rollout& rollout,
                                       double advantage,
                                       const ClipConfig& clip);

// Geometric-mean surrogate with the clip applied once to the whole-sequence
// log-ratio sum; a clipped sequence zeroes every token score.
ObjectiveResult gmpo_seqclip_rollout_objective(std::span<const double> new_logps,
                                               const Rollout& rollout,
                                               double advantage,
                                               const ClipConfig& clip);

// Token-clipped geometric objective without the 1/|o| normalization:
// value = A * exp(sum of m_t).
ObjectiveResult gmpo_nonorm_rollout_objective(std::span<const double> new_logps,
                                              const Rollout& rollout,
                                              double advantage,
                                              const ClipConfig& clip);

// Dispatch on ObjectiveKind (GmpoNoClip forces ClipMode::None).
ObjectiveResult rollout_objective(ObjectiveKind kind,
                                  std::span<const double> new_logps,
                                  const Rollout& rollout, double advantage,
                                  const ClipConfig& clip);

// Mean per-rollout objective over a batch of groups. new_logps_per_group is
// parallel to groups; new_logps_per_group[g][i] belongs to groups[g].rollouts[i].
double batch_objective(
    std::span<const RolloutGroup> groups,
    std::span<const std::vector<std::vector<double>>> new_logps_per_group,
    ObjectiveKind kind, const ClipConfig& clip);

struct GradientWeights {
  std::vector<double> grpo_weights;  // per-token: rho_t
  double gmpo_weight = 0.0;          // shared: (prod rho_t)^(1/n)
};

// Diagnostic comparison of the per-token gradient weights of the two
// unclipped objectives, up to the common A/|o| factor.
GradientWeights gradient_weight_comparison(std::span<const double> ratios);

}  // namespace gmpo
