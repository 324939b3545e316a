#include "gmpo/oracle.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "gmpo/objectives.hpp"
#include "gmpo/rng.hpp"

namespace gmpo {
namespace oracle {

namespace {

double pessimistic_clip_linear(double x, double eps1, double eps2) {
  // min(x, clamp(x, eps1, eps2)): only the upper bound ever lowers x
  return std::min(x, std::min(std::max(x, eps1), eps2));
}

}  // namespace

double linear_space_objective(std::span<const double> new_logps,
                              const Rollout& rollout, double advantage,
                              ObjectiveKind kind, const ClipConfig& clip) {
  if (new_logps.size() != rollout.tokens.size())
    throw std::invalid_argument("linear oracle: length mismatch");
  const int n = rollout.valid_count();
  if (static_cast<int>(rollout.tokens.size()) > 12)
    throw std::invalid_argument("linear oracle: |o| > 12 outside oracle domain");
  for (std::size_t t = 0; t < new_logps.size(); ++t) {
    if (rollout.mask[t] &&
        std::abs(new_logps[t] - rollout.old_logps[t]) > 5.0)
      throw std::invalid_argument("linear oracle: |d_t| > 5 outside oracle domain");
  }

  const double eps1 = std::exp(clip.lower_log);
  const double eps2 = std::exp(clip.upper_log);
  const double s = advantage > 0.0 ? 1.0 : -1.0;

  if (kind == ObjectiveKind::Grpo) {
    double acc = 0.0;
    for (std::size_t t = 0; t < new_logps.size(); ++t) {
      if (!rollout.mask[t]) continue;
      const double rho = std::exp(new_logps[t]) / std::exp(rollout.old_logps[t]);
      const double clamped = std::min(std::max(rho, eps1), eps2);
      acc += std::min(rho * advantage, clamped * advantage);
    }
    return acc / n;
  }

  if (kind == ObjectiveKind::GmpoSeqClip) {
    double prod = 1.0;
    for (std::size_t t = 0; t < new_logps.size(); ++t) {
      if (!rollout.mask[t]) continue;
      prod *= std::exp(new_logps[t]) / std::exp(rollout.old_logps[t]);
    }
    const double x = std::pow(prod, s);
    const double term = std::pow(pessimistic_clip_linear(x, eps1, eps2), s);
    return advantage * std::pow(term, 1.0 / n);
  }

  // token-clipped geometric variants
  const bool token_clip =
      kind == ObjectiveKind::Gmpo || kind == ObjectiveKind::GmpoNoNorm;
  double prod = 1.0;
  for (std::size_t t = 0; t < new_logps.size(); ++t) {
    if (!rollout.mask[t]) continue;
    const double rho = std::exp(new_logps[t]) / std::exp(rollout.old_logps[t]);
    if (token_clip && clip.mode == ClipMode::Token) {
      const double x = std::pow(rho, s);
      prod *= std::pow(pessimistic_clip_linear(x, eps1, eps2), s);
    } else {
      prod *= rho;
    }
  }
  if (kind == ObjectiveKind::GmpoNoNorm) return advantage * prod;
  return advantage * std::pow(prod, 1.0 / n);
}

namespace {

// naive softmax log-probability, independent of the policy module's
// max-subtracted path
double naive_log_prob(const PolicyParams& params, int bucket, int token) {
  double denom = 0.0;
  for (int v = 0; v < params.vocab_size; ++v)
    denom += std::exp(params.logit(bucket, v));
  return std::log(std::exp(params.logit(bucket, token)) / denom);
}

double oracle_batch_objective(const PolicyParams& params,
                              std::span<const MinibatchItem> batch,
                              ObjectiveKind kind, const ClipConfig& clip) {
  double acc = 0.0;
  for (const MinibatchItem& item : batch) {
    const Rollout& r = *item.rollout;
    std::vector<double> new_logps(r.tokens.size());
    for (std::size_t t = 0; t < r.tokens.size(); ++t)
      new_logps[t] = naive_log_prob(params, r.buckets[t], r.tokens[t]);
    acc += linear_space_objective(new_logps, r, item.advantage, kind, clip);
  }
  return acc / static_cast<double>(batch.size());
}

}  // namespace

GradTable finite_diff_objective_grad(const PolicyParams& params,
                                     std::span<const MinibatchItem> batch,
                                     ObjectiveKind kind, const ClipConfig& clip,
                                     double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite diff: h must be > 0");
  GradTable grad = GradTable::zeros_like(params);

  std::vector<std::uint8_t> touched(params.num_buckets, 0);
  for (const MinibatchItem& item : batch)
    for (int b : item.rollout->buckets) touched[b] = 1;

  PolicyParams work = params;
  for (int b = 0; b < params.num_buckets; ++b) {
    if (!touched[b]) continue;
    for (int v = 0; v < params.vocab_size; ++v) {
      const double saved = work.logit(b, v);
      work.logit(b, v) = saved + h;
      const double plus = oracle_batch_objective(work, batch, kind, clip);
      work.logit(b, v) = saved - h;
      const double minus = oracle_batch_objective(work, batch, kind, clip);
      work.logit(b, v) = saved;
      grad.at(b, v) = (plus - minus) / (2.0 * h);
    }
  }
  return grad;
}

namespace {

struct Instance {
  PolicyParams params;
  PolicyParams old_params;
  Rollout rollout;
  double advantage = 0.0;
  ObjectiveKind kind = ObjectiveKind::Gmpo;
  ClipConfig clip;
  bool any_clipped = false;
};

std::string describe(const Instance& inst) {
  std::ostringstream os;
  os << "kind=" << to_string(inst.kind) << " adv=" << inst.advantage
     << " len=" << inst.rollout.tokens.size() << " tokens=[";
  for (std::size_t i = 0; i < inst.rollout.tokens.size(); ++i)
    os << (i ? "," : "") << inst.rollout.tokens[i];
  os << "] mask=[";
  for (std::size_t i = 0; i < inst.rollout.mask.size(); ++i)
    os << (i ? "," : "") << int(inst.rollout.mask[i]);
  os << "]";
  return os.str();
}

// Builds a random small instance; returns false when it straddles a clip
// kink (within 10h of a boundary) so the caller can redraw.
bool build_instance(std::uint64_t seed, double h, Instance& out) {
  RngStream rng(seed);
  const int vocab = 2 + static_cast<int>(rng.uniform_int(4));  // 2..5
  const int buckets = 16;
  const int len = 1 + static_cast<int>(rng.uniform_int(6));  // 1..6

  out.params = PolicyParams::zeros(buckets, vocab, /*order=*/1);
  out.old_params = PolicyParams::zeros(buckets, vocab, /*order=*/1);
  for (double& x : out.params.logits) x = 0.8 * rng.normal();
  for (double& x : out.old_params.logits) x = 0.8 * rng.normal();

  Rollout r;
  r.prompt_id = rng.next_u64();
  for (int t = 0; t < len; ++t) {
    const int token = static_cast<int>(rng.uniform_int(vocab));
    const int bucket = context_bucket(r.prompt_id, r.tokens, 1, buckets);
    r.buckets.push_back(bucket);
    r.tokens.push_back(token);
    r.old_logps.push_back(log_prob(out.old_params, bucket, token));
    r.mask.push_back(1);
  }
  if (len > 2 && rng.uniform() < 0.3)
    r.mask[rng.uniform_int(len)] = 0;  // at least one stays valid
  out.rollout = std::move(r);

  out.advantage = (rng.uniform() < 0.5 ? 1.0 : -1.0) * (0.5 + 1.5 * rng.uniform());

  static const ObjectiveKind kinds[] = {
      ObjectiveKind::Grpo, ObjectiveKind::Gmpo, ObjectiveKind::GmpoNoClip,
      ObjectiveKind::GmpoSeqClip, ObjectiveKind::GmpoNoNorm};
  out.kind = kinds[rng.uniform_int(5)];
  if (out.kind == ObjectiveKind::Grpo) {
    out.clip = ClipConfig::grpo_linear(0.2);
  } else if (out.kind == ObjectiveKind::GmpoSeqClip) {
    out.clip = ClipConfig::sequence_log(-0.3, 0.3);
  } else {
    out.clip = ClipConfig::token_log(-0.3, 0.3);
  }

  // kink avoidance and clip bookkeeping
  const double margin = 10.0 * h;
  const double s = out.advantage > 0.0 ? 1.0 : -1.0;
  out.any_clipped = false;
  double seq_sum = 0.0;
  for (std::size_t t = 0; t < out.rollout.tokens.size(); ++t) {
    if (!out.rollout.mask[t]) continue;
    const double d = log_prob(out.params, out.rollout.buckets[t],
                              out.rollout.tokens[t]) -
                     out.rollout.old_logps[t];
    seq_sum += d;
    if (out.kind == ObjectiveKind::Grpo) {
      if (std::abs(d - out.clip.lower_log) < margin ||
          std::abs(d - out.clip.upper_log) < margin)
        return false;
      const double clamped = std::min(
          std::max(std::exp(d), std::exp(out.clip.lower_log)),
          std::exp(out.clip.upper_log));
      if (clamped * out.advantage < std::exp(d) * out.advantage)
        out.any_clipped = true;
    } else if (out.kind != ObjectiveKind::GmpoSeqClip &&
               out.kind != ObjectiveKind::GmpoNoClip) {
      if (std::abs(s * d - out.clip.upper_log) < margin) return false;
      if (s * d > out.clip.upper_log) out.any_clipped = true;
    }
  }
  if (out.kind == ObjectiveKind::GmpoSeqClip) {
    if (std::abs(s * seq_sum - out.clip.upper_log) < margin) return false;
    if (s * seq_sum > out.clip.upper_log) out.any_clipped = true;
  }
  return true;
}

}  // namespace

GradCheckReport grad_check_sweep(int instances, std::uint64_t seed, double h) {
  if (instances < 1)
    throw std::invalid_argument("grad_check_sweep: need at least 1 instance");

  GradCheckReport report;
  int clipped_instances = 0;

  for (int i = 0; i < instances; ++i) {
    Instance inst;
    std::uint64_t inst_seed = derive_seed(seed, 0x9c, i);
    int attempts = 0;
    while (!build_instance(inst_seed, h, inst)) {
      inst_seed = derive_seed(inst_seed, 0xee, ++attempts);
      if (attempts > 100)
        throw std::runtime_error("grad_check_sweep: cannot avoid clip kink");
    }
    if (inst.any_clipped) ++clipped_instances;

    const MinibatchItem item{&inst.rollout, inst.advantage};
    const std::span<const MinibatchItem> batch(&item, 1);

    GradTable analytic = GradTable::zeros_like(inst.params);
    accumulate_objective_gradient(inst.params, batch, inst.kind, inst.clip,
                                  analytic);
    const GradTable numeric =
        finite_diff_objective_grad(inst.params, batch, inst.kind, inst.clip, h);

    for (int b = 0; b < inst.params.num_buckets; ++b) {
      for (int v = 0; v < inst.params.vocab_size; ++v) {
        const double a = analytic.at(b, v);
        const double f = numeric.at(b, v);
        const double rel =
            std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1e-12});
        if (rel > report.max_rel_error) {
          report.max_rel_error = rel;
          report.worst_bucket = b;
          report.worst_token = v;
          report.worst_instance_seed = inst_seed;
          report.worst_instance = describe(inst);
        }
      }
    }
  }
  report.clipped_instance_fraction =
      static_cast<double>(clipped_instances) / instances;
  return report;
}

AmgmReport amgm_sweep(int instances, std::uint64_t seed) {
  if (instances < 1)
    throw std::invalid_argument("amgm_sweep: need at least 1 instance");

  AmgmReport report;
  const ClipConfig no_clip = ClipConfig::none();

  for (int i = 0; i < instances; ++i) {
    const std::uint64_t inst_seed = derive_seed(seed, 0xa6, i);
    RngStream rng(inst_seed);
    const int len = 1 + static_cast<int>(rng.uniform_int(50));
    const double advantage =
        (rng.uniform() < 0.5 ? 1.0 : -1.0) * (0.25 + 1.75 * rng.uniform());

    Rollout r;
    r.prompt_id = i;
    std::vector<double> new_logps(len);
    for (int t = 0; t < len; ++t) {
      const double d = rng.normal();
      r.tokens.push_back(0);
      r.buckets.push_back(0);
      r.old_logps.push_back(-6.0);
      r.mask.push_back(1);
      new_logps[t] = -6.0 + d;
    }

    const double grpo =
        grpo_rollout_objective(new_logps, r, advantage, no_clip).value;
    const double gmpo =
        gmpo_rollout_objective(new_logps, r, advantage, no_clip).value;
    const double margin = std::abs(gmpo) - std::abs(grpo);
    if (margin > report.worst_margin) report.worst_margin = margin;
    if (margin > 1e-12) {
      report.pass = false;
      report.fail_seed = inst_seed;
      std::ostringstream os;
      os << "len=" << len << " adv=" << advantage << " |gmpo|-|grpo|="
         << margin;
      report.fail_instance = os.str();
      return report;
    }

    // forced-equal-ratio instance: AM-GM equality case
    const double d = 0.5 * rng.normal();
    std::vector<double> equal_logps(len, -6.0 + d);
    const double grpo_eq =
        grpo_rollout_objective(equal_logps, r, advantage, no_clip).value;
    const double gmpo_eq =
        gmpo_rollout_objective(equal_logps, r, advantage, no_clip).value;
    const double gap = std::abs(grpo_eq - gmpo_eq);
    report.worst_equality_gap = std::max(report.worst_equality_gap, gap);
    if (gap > 1e-9) {
      report.pass = false;
      report.fail_seed = inst_seed;
      std::ostringstream os;
      os << "equality case len=" << len << " d=" << d << " gap=" << gap;
      report.fail_instance = os.str();
      return report;
    }
  }
  return report;
}

}  // namespace oracle
}  // namespace gmpo
