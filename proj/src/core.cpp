#include "gmpo/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gmpo {

int Rollout::valid_count() const {
  return static_cast<int>(std::count(mask.begin(), mask.end(), 1));
}

void Rollout::validate() const {
  if (tokens.empty()) throw std::invalid_argument("rollout: empty token sequence");
  if (tokens.size() != old_logps.size() || tokens.size() != mask.size())
    throw std::invalid_argument("rollout: tokens/old_logps/mask length mismatch");
  if (valid_count() == 0)
    throw std::invalid_argument("rollout: no valid tokens in mask");
  for (double lp : old_logps) {
    if (!std::isfinite(lp) || lp > 0.0)
      throw std::invalid_argument("rollout: old_logps must be finite and <= 0");
  }
}

ClipConfig ClipConfig::token_log(double lower, double upper) {
  ClipConfig c{lower, upper, ClipMode::Token};
  c.validate();
  return c;
}

ClipConfig ClipConfig::sequence_log(double lower, double upper) {
  ClipConfig c{lower, upper, ClipMode::Sequence};
  c.validate();
  return c;
}

ClipConfig ClipConfig::none() {
  return ClipConfig{-std::numeric_limits<double>::infinity(),
                    std::numeric_limits<double>::infinity(), ClipMode::None};
}

ClipConfig ClipConfig::grpo_linear(double eps) {
  if (!(eps > 0.0 && eps < 1.0))
    throw std::invalid_argument("grpo clip eps must be in (0, 1)");
  return token_log(std::log(1.0 - eps), std::log(1.0 + eps));
}

void ClipConfig::validate() const {
  if (std::isnan(lower_log) || std::isnan(upper_log))
    throw std::invalid_argument("clip thresholds must not be NaN");
  if (lower_log > 0.0 || upper_log < 0.0)
    throw std::invalid_argument("clip thresholds must satisfy L <= 0 <= U");
}

std::string to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::Grpo: return "GRPO";
    case ObjectiveKind::Gmpo: return "GMPO";
    case ObjectiveKind::GmpoNoClip: return "GMPO_NOCLIP";
    case ObjectiveKind::GmpoSeqClip: return "GMPO_SEQCLIP";
    case ObjectiveKind::GmpoNoNorm: return "GMPO_NONORM";
  }
  throw std::logic_error("unknown objective kind");
}

ObjectiveKind objective_kind_from_string(const std::string& name) {
  if (name == "GRPO") return ObjectiveKind::Grpo;
  if (name == "GMPO") return ObjectiveKind::Gmpo;
  if (name == "GMPO_NOCLIP") return ObjectiveKind::GmpoNoClip;
  if (name == "GMPO_SEQCLIP") return ObjectiveKind::GmpoSeqClip;
  if (name == "GMPO_NONORM") return ObjectiveKind::GmpoNoNorm;
  throw std::invalid_argument("unknown objective kind: " + name);
}

std::vector<double> normalize_group(std::span<const double> rewards) {
  const std::size_t g = rewards.size();
  if (g < 2) throw std::invalid_argument("normalize_group: need at least 2 rewards");

  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);

  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(g);  // population variance
  const double sd = std::sqrt(var);

  std::vector<double> adv(g, 0.0);
  if (sd == 0.0) return adv;  // zero-variance group: zero advantage, zero gradient

  const double denom = std::max(sd, 1e-8);
  for (std::size_t i = 0; i < g; ++i) adv[i] = (rewards[i] - mean) / denom;
  return adv;
}

double sgn(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("sgn: non-finite input");
  return x > 0.0 ? 1.0 : -1.0;
}

}  // namespace gmpo
