#pragma once

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "gmpo/core.hpp"
#include "gmpo/policy.hpp"

namespace gmpo {

// One record per inner update. Ratio extremes are recorded pre-clip; the
// clipping is the response to the envelope, so recording post-clip would hide
// the phenomenon being measured.
struct StepTelemetry {
  int round = 0;
  int update = 0;
  double ratio_log_min = 0.0;
  double ratio_log_max = 0.0;
  double mean_entropy = 0.0;
  double kl_ref = 0.0;
  double mean_reward = 0.0;
  double clip_fraction = 0.0;
  double objective_value = 0.0;
};

// CSV column order, the stable schema of write_csv.
inline constexpr const char* kTelemetryHeader =
    "round,update,ratio_log_min,ratio_log_max,mean_entropy,kl_ref,"
    "mean_reward,clip_fraction,objective_value";

// Extremes of the raw per-token log importance ratios over a minibatch,
// valid tokens only.
std::pair<double, double> ratio_envelope(
    std::span<const std::vector<double>> new_logps_per_rollout,
    std::span<const Rollout* const> rollouts);

// On-sample estimator of D_KL(current || ref): mean over sampled valid tokens
// of log pi_theta(o_t) - log pi_ref(o_t). May be slightly negative from
// sampling noise; reported as-is.
double kl_estimate(const PolicyParams& current, const PolicyParams& ref,
                   std::span<const Rollout* const> rollouts);

// Header row then one row per record, shortest round-trip double formatting,
// newline-terminated. Bit-identical across runs with identical inputs.
void write_csv(std::span<const StepTelemetry> series,
               const std::filesystem::path& path);

std::vector<StepTelemetry> read_csv(const std::filesystem::path& path);

}  // namespace gmpo
