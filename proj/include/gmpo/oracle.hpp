#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gmpo/core.hpp"
#include "gmpo/policy.hpp"
#include "gmpo/trainer.hpp"

namespace gmpo {
namespace oracle {

// Direct product-and-root evaluation of the surrogate in probability space,
// no log-space tricks. Restricted to small instances where naive products
// are safe; cross-validates the log-space implementations.
double linear_space_objective(std::span<const double> new_logps,
                              const Rollout& rollout, double advantage,
                              ObjectiveKind kind, const ClipConfig& clip);

// Central finite differences of the batch objective over every logit of the
// buckets the minibatch touches. The objective is evaluated through naive
// softmax probabilities and linear_space_objective, sharing no code with the
// objectives module.
GradTable finite_diff_objective_grad(const PolicyParams& params,
                                     std::span<const MinibatchItem> batch,
                                     ObjectiveKind kind, const ClipConfig& clip,
                                     double h = 1e-5);

struct GradCheckReport {
  double max_rel_error = 0.0;
  int worst_bucket = -1;
  int worst_token = -1;
  std::uint64_t worst_instance_seed = 0;
  std::string worst_instance;  // human-readable dump
  double clipped_instance_fraction = 0.0;
};

// Random-instance sweep comparing analytic gradients against central finite
// differences, all objective kinds, with clipping active in a controlled
// share of instances. Instances straddling a clip kink are resampled.
GradCheckReport grad_check_sweep(int instances, std::uint64_t seed,
                                 double h = 1e-5);

struct AmgmReport {
  bool pass = true;
  double worst_margin = -std::numeric_limits<double>::infinity();
  double worst_equality_gap = 0.0;
  std::uint64_t fail_seed = 0;
  std::string fail_instance;
};

// Random sweep asserting |GMPO unclipped| <= |GRPO unclipped| + 1e-12, and
// equality within 1e-9 on forced-equal-ratio instances.
AmgmReport amgm_sweep(int instances, std::uint64_t seed);

}  // namespace oracle
}  // namespace gmpo
