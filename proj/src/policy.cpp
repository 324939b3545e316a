#include "gmpo/policy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace gmpo {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// log(sum(exp(row - max))) + max
double log_sum_exp(std::span<const double> row) {
  const double m = *std::max_element(row.begin(), row.end());
  double s = 0.0;
  for (double x : row) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

PolicyParams PolicyParams::zeros(int buckets, int vocab, int order,
                                 std::uint64_t seed) {
  if (buckets < 1 || vocab < 2 || order < 0)
    throw std::invalid_argument("policy: need H >= 1, V >= 2, k >= 0");
  PolicyParams p;
  p.num_buckets = buckets;
  p.vocab_size = vocab;
  p.context_order = order;
  p.seed = seed;
  p.logits.assign(static_cast<std::size_t>(buckets) * vocab, 0.0);
  return p;
}

int context_bucket(std::uint64_t prompt_id, std::span<const int> preceding,
                   int k, int num_buckets) {
  std::uint64_t s = mix64(prompt_id);
  const std::size_t take =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)),
                            preceding.size());
  for (std::size_t i = preceding.size() - take; i < preceding.size(); ++i) {
    s = mix64(s ^ mix64(static_cast<std::uint64_t>(preceding[i]) + 1));
  }
  return static_cast<int>(s % static_cast<std::uint64_t>(num_buckets));
}

double log_prob(const PolicyParams& params, int bucket, int token) {
  if (token < 0 || token >= params.vocab_size)
    throw std::out_of_range("log_prob: token out of range");
  const auto row = params.row(bucket);
  return row[token] - log_sum_exp(row);
}

std::vector<double> log_prob_row(const PolicyParams& params, int bucket) {
  const auto row = params.row(bucket);
  const double lse = log_sum_exp(row);
  std::vector<double> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = row[i] - lse;
  return out;
}

std::vector<double> score(const PolicyParams& params, int bucket, int token) {
  if (token < 0 || token >= params.vocab_size)
    throw std::out_of_range("score: token out of range");
  const auto logps = log_prob_row(params, bucket);
  std::vector<double> g(logps.size());
  for (std::size_t i = 0; i < logps.size(); ++i) g[i] = -std::exp(logps[i]);
  g[token] += 1.0;
  return g;
}

double entropy(const PolicyParams& params, int bucket) {
  const auto logps = log_prob_row(params, bucket);
  double h = 0.0;
  for (double lp : logps) h -= std::exp(lp) * lp;
  return std::max(h, 0.0);
}

Rollout sample_rollout(const PolicyParams& params, std::uint64_t prompt_id,
                       int eos_token, int max_len, double temperature,
                       RngStream& rng) {
  if (max_len < 1) throw std::invalid_argument("sample_rollout: max_len >= 1");
  if (temperature < 0.0)
    throw std::invalid_argument("sample_rollout: temperature >= 0");

  Rollout r;
  r.prompt_id = prompt_id;
  while (static_cast<int>(r.tokens.size()) < max_len) {
    const int bucket =
        context_bucket(prompt_id, r.tokens, params.context_order,
                       params.num_buckets);
    const auto logps = log_prob_row(params, bucket);

    int token;
    if (temperature == 0.0) {
      const auto row = params.row(bucket);
      token = static_cast<int>(
          std::max_element(row.begin(), row.end()) - row.begin());
    } else {
      // tempered sampling by inverse CDF over softmax(logits / T)
      const auto row = params.row(bucket);
      std::vector<double> t(row.size());
      for (std::size_t i = 0; i < row.size(); ++i) t[i] = row[i] / temperature;
      const double lse = log_sum_exp(t);
      const double u = rng.uniform();
      double acc = 0.0;
      token = params.vocab_size - 1;
      for (int i = 0; i < params.vocab_size; ++i) {
        acc += std::exp(t[i] - lse);
        if (u < acc) {
          token = i;
          break;
        }
      }
    }

    r.buckets.push_back(bucket);
    r.tokens.push_back(token);
    r.old_logps.push_back(std::min(logps[token], 0.0));
    r.mask.push_back(1);
    if (token == eos_token) break;
  }
  return r;
}

GradTable GradTable::zeros_like(const PolicyParams& params) {
  GradTable g;
  g.num_buckets = params.num_buckets;
  g.vocab_size = params.vocab_size;
  g.values.assign(params.logits.size(), 0.0);
  return g;
}

bool GradTable::all_finite() const {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

void apply_gradient(PolicyParams& params, const GradTable& grad,
                    double step_size) {
  if (grad.values.size() != params.logits.size())
    throw std::invalid_argument("apply_gradient: shape mismatch");
  for (std::size_t i = 0; i < params.logits.size(); ++i)
    params.logits[i] += step_size * grad.values[i];
}

void save_checkpoint(const PolicyParams& params,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open checkpoint for write: " +
                                     path.string());
  out << "gmpo-policy 1\n";
  out << params.num_buckets << ' ' << params.vocab_size << ' '
      << params.context_order << ' ' << params.seed << '\n';
  for (int b = 0; b < params.num_buckets; ++b) {
    for (int v = 0; v < params.vocab_size; ++v) {
      if (v) out << ' ';
      out << format_double(params.logit(b, v));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "gmpo-policy" || version != 1)
    throw std::runtime_error("bad checkpoint header: " + path.string());
  int buckets = 0, vocab = 0, order = 0;
  std::uint64_t seed = 0;
  in >> buckets >> vocab >> order >> seed;
  PolicyParams p = PolicyParams::zeros(buckets, vocab, order, seed);
  for (double& x : p.logits) {
    if (!(in >> x)) throw std::runtime_error("truncated checkpoint: " + path.string());
  }
  return p;
}

}  // namespace gmpo
