#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace gmpo {

// One sampled token sequence for a prompt, with the log-probabilities it had
// under the policy that generated it.
struct Rollout {
  std::uint64_t prompt_id = 0;
  std::vector<int> tokens;
  std::vector<double> old_logps;   // natural log, each finite and <= 0
  std::vector<std::uint8_t> mask;  // 1 = valid token
  std::vector<int> buckets;        // context buckets, cached at sampling time

  int valid_count() const;
  void validate() const;  // throws std::invalid_argument on broken invariants
};

// The G rollouts sampled for one prompt plus their binary rewards and
// group-normalized advantages.
struct RolloutGroup {
  std::vector<Rollout> rollouts;
  std::vector<double> rewards;     // binary {0, 1}
  std::vector<double> advantages;  // filled by normalize_group
};

enum class ClipMode { Token, Sequence, None };

// Log-space clipping thresholds. lower_log = ln(eps1) <= 0, upper_log =
// ln(eps2) >= 0; either may be infinite.
struct ClipConfig {
  double lower_log = -std::numeric_limits<double>::infinity();
  double upper_log = std::numeric_limits<double>::infinity();
  ClipMode mode = ClipMode::None;

  static ClipConfig token_log(double lower, double upper);
  static ClipConfig sequence_log(double lower, double upper);
  static ClipConfig none();
  // GRPO-style linear-space range (1-eps, 1+eps), stored as logs
  static ClipConfig grpo_linear(double eps);

  void validate() const;
};

enum class ObjectiveKind { Grpo, Gmpo, GmpoNoClip, GmpoSeqClip, GmpoNoNorm };

std::string to_string(ObjectiveKind kind);
ObjectiveKind objective_kind_from_string(const std::string& name);

// Group-relative advantage normalization: (r - mean) / max(pop_std, 1e-8).
// A zero-variance group maps to all-zero advantages.
std::vector<double> normalize_group(std::span<const double> rewards);

// +1 iff x > 0, -1 otherwise (including exactly 0).
double sgn(double x);

}  // namespace gmpo
