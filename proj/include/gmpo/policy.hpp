#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "gmpo/core.hpp"
#include "gmpo/rng.hpp"

namespace gmpo {

// Context-bucketed tabular softmax policy. Each (prompt, previous-k-tokens)
// context hashes to one of H logit rows over a vocabulary of V tokens; the
// last vocabulary index is the end-of-sequence token by convention of the
// environment, not of the policy itself.
struct PolicyParams {
  int num_buckets = 0;    // H
  int vocab_size = 0;     // V
  int context_order = 0;  // k
  std::uint64_t seed = 0; // sampling seed recorded in checkpoints
  std::vector<double> logits;  // H x V, row-major

  static PolicyParams zeros(int buckets, int vocab, int order,
                            std::uint64_t seed = 0);

  double& logit(int bucket, int token) {
    return logits[static_cast<std::size_t>(bucket) * vocab_size + token];
  }
  double logit(int bucket, int token) const {
    return logits[static_cast<std::size_t>(bucket) * vocab_size + token];
  }
  std::span<const double> row(int bucket) const {
    return {logits.data() + static_cast<std::size_t>(bucket) * vocab_size,
            static_cast<std::size_t>(vocab_size)};
  }
};

// Frozen copy of PolicyParams (pi_theta_old / pi_ref), const access only.
class PolicySnapshot {
 public:
  explicit PolicySnapshot(PolicyParams params) : params_(std::move(params)) {}
  const PolicyParams& get() const { return params_; }

 private:
  PolicyParams params_;
};

// Stable hash of (prompt_id, last min(k, available) preceding tokens) mod H.
// Formula: start from mix64(prompt_id), then fold each of the last k tokens
// (oldest first) with s = mix64(s ^ mix64(token + 1)); bucket = s mod H.
int context_bucket(std::uint64_t prompt_id, std::span<const int> preceding,
                   int k, int num_buckets);

// log-softmax of the bucket's logit row at `token`, max-subtracted.
double log_prob(const PolicyParams& params, int bucket, int token);

// All V log-probabilities of one bucket.
std::vector<double> log_prob_row(const PolicyParams& params, int bucket);

// Gradient of log_prob w.r.t. the bucket's logit row:
// onehot(token) - softmax(row).
std::vector<double> score(const PolicyParams& params, int bucket, int token);

// Shannon entropy (nats) of the bucket's softmax distribution.
double entropy(const PolicyParams& params, int bucket);

// Autoregressive sampling until eos_token or max_len. temperature 0 is greedy
// argmax with lowest-index tie-break. old_logps are always the temperature-1
// log-probabilities of the sampled tokens.
Rollout sample_rollout(const PolicyParams& params, std::uint64_t prompt_id,
                       int eos_token, int max_len, double temperature,
                       RngStream& rng);

// Dense H x V gradient accumulator with the same layout as PolicyParams.
struct GradTable {
  int num_buckets = 0;
  int vocab_size = 0;
  std::vector<double> values;

  static GradTable zeros_like(const PolicyParams& params);
  double& at(int bucket, int token) {
    return values[static_cast<std::size_t>(bucket) * vocab_size + token];
  }
  double at(int bucket, int token) const {
    return values[static_cast<std::size_t>(bucket) * vocab_size + token];
  }
  bool all_finite() const;
};

// params += step_size * grad (ascent step).
void apply_gradient(PolicyParams& params, const GradTable& grad,
                    double step_size);

// Text checkpoint: header line "gmpo-policy 1", then "H V k seed", then one
// whitespace-separated row of V logits per bucket, shortest round-trip
// formatting. Stable interface.
void save_checkpoint(const PolicyParams& params,
                     const std::filesystem::path& path);
PolicyParams load_checkpoint(const std::filesystem::path& path);

}  // namespace gmpo
