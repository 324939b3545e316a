#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gmpo/policy.hpp"

using namespace gmpo;

TEST_CASE("context_bucket determinism and k=0") {
  std::vector<int> none;
  CHECK(context_bucket(7, none, 2, 64) == context_bucket(7, none, 2, 64));

  std::vector<int> a{3, 1}, b{7, 7};
  CHECK(context_bucket(5, a, 0, 64) == context_bucket(5, b, 0, 64));

  // documented formula: fold the last min(k, available) tokens into
  // mix64(prompt_id)
  std::vector<int> ctx{3};
  std::uint64_t s = mix64(9);
  s = mix64(s ^ mix64(static_cast<std::uint64_t>(3) + 1));
  CHECK(context_bucket(9, ctx, 1, 64) == static_cast<int>(s % 64));

  // only the last k tokens matter
  std::vector<int> long_ctx{9, 9, 4, 2}, short_ctx{4, 2};
  CHECK(context_bucket(1, long_ctx, 2, 128) ==
        context_bucket(1, short_ctx, 2, 128));
}

TEST_CASE("log_prob: softmax examples") {
  auto p = PolicyParams::zeros(1, 2, 0);
  CHECK(log_prob(p, 0, 0) == doctest::Approx(std::log(0.5)).epsilon(1e-12));

  auto q = PolicyParams::zeros(1, 3, 0);
  q.logit(0, 0) = q.logit(0, 1) = q.logit(0, 2) = 1.0;
  CHECK(log_prob(q, 0, 1) ==
        doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-12));

  auto r = PolicyParams::zeros(1, 2, 0);
  r.logit(0, 0) = 2.0;
  CHECK(log_prob(r, 0, 0) ==
        doctest::Approx(2.0 - std::log(std::exp(2.0) + 1.0)).epsilon(1e-12));

  CHECK_THROWS_AS(log_prob(p, 0, 5), std::out_of_range);
}

TEST_CASE("log_prob: probabilities sum to 1 per bucket") {
  RngStream rng(3);
  auto p = PolicyParams::zeros(8, 5, 1);
  for (double& x : p.logits) x = 3.0 * rng.normal();
  for (int b = 0; b < p.num_buckets; ++b) {
    double total = 0.0;
    for (int v = 0; v < p.vocab_size; ++v) total += std::exp(log_prob(p, b, v));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("score: softmax gradient identity and examples") {
  auto p = PolicyParams::zeros(1, 2, 0);
  auto g = score(p, 0, 0);
  CHECK(g[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g[1] == doctest::Approx(-0.5).epsilon(1e-12));

  auto sat = PolicyParams::zeros(1, 2, 0);
  sat.logit(0, 0) = 40.0;
  sat.logit(0, 1) = -40.0;
  auto gs = score(sat, 0, 0);
  CHECK(std::abs(gs[0]) < 1e-12);
  CHECK(std::abs(gs[1]) < 1e-12);

  RngStream rng(5);
  auto q = PolicyParams::zeros(4, 6, 1);
  for (double& x : q.logits) x = rng.normal();
  for (int b = 0; b < q.num_buckets; ++b) {
    for (int v = 0; v < q.vocab_size; ++v) {
      auto sc = score(q, b, v);
      double sum = 0.0;
      for (double x : sc) sum += x;
      CHECK(std::abs(sum) < 1e-12);
    }
  }
}

TEST_CASE("score matches central finite differences of log_prob") {
  RngStream rng(13);
  auto p = PolicyParams::zeros(4, 4, 1);
  for (double& x : p.logits) x = rng.normal();
  const double h = 1e-6;
  for (int b = 0; b < p.num_buckets; ++b) {
    for (int tok = 0; tok < p.vocab_size; ++tok) {
      const auto analytic = score(p, b, tok);
      for (int v = 0; v < p.vocab_size; ++v) {
        const double saved = p.logit(b, v);
        p.logit(b, v) = saved + h;
        const double plus = log_prob(p, b, tok);
        p.logit(b, v) = saved - h;
        const double minus = log_prob(p, b, tok);
        p.logit(b, v) = saved;
        const double fd = (plus - minus) / (2 * h);
        CHECK(std::abs(analytic[v] - fd) /
                  std::max({std::abs(analytic[v]), std::abs(fd), 1e-6}) <
              1e-6);
      }
    }
  }
}

TEST_CASE("entropy examples") {
  auto p = PolicyParams::zeros(1, 5, 0);
  CHECK(entropy(p, 0) == doctest::Approx(std::log(5.0)).epsilon(1e-12));

  auto sat = PolicyParams::zeros(1, 2, 0);
  sat.logit(0, 0) = 40.0;
  sat.logit(0, 1) = -40.0;
  CHECK(entropy(sat, 0) == doctest::Approx(0.0).epsilon(1e-9));

  auto q = PolicyParams::zeros(1, 2, 0);
  q.logit(0, 0) = std::log(3.0);
  const double expected = -0.75 * std::log(0.75) - 0.25 * std::log(0.25);
  CHECK(entropy(q, 0) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("sample_rollout: greedy decoding is deterministic and idempotent") {
  auto p = PolicyParams::zeros(16, 4, 1);
  for (int b = 0; b < p.num_buckets; ++b) p.logit(b, 2) = 1.0;  // token 2 wins
  RngStream rng(0);
  const auto r1 = sample_rollout(p, 42, /*eos=*/3, /*max_len=*/5, 0.0, rng);
  const auto r2 = sample_rollout(p, 42, 3, 5, 0.0, rng);
  CHECK(r1.tokens == std::vector<int>(5, 2));
  CHECK(r1.tokens == r2.tokens);
  CHECK(r1.old_logps == r2.old_logps);
}

TEST_CASE("sample_rollout: greedy tie-break picks lowest index") {
  auto p = PolicyParams::zeros(4, 3, 0);
  RngStream rng(0);
  const auto r = sample_rollout(p, 1, /*eos=*/2, /*max_len=*/3, 0.0, rng);
  CHECK(r.tokens.front() == 0);
}

TEST_CASE("sample_rollout: same seed gives identical rollouts") {
  RngStream rng_seed(99);
  auto p = PolicyParams::zeros(32, 4, 2);
  for (double& x : p.logits) x = rng_seed.normal();
  RngStream a(1234), b(1234);
  const auto ra = sample_rollout(p, 7, 3, 10, 1.0, a);
  const auto rb = sample_rollout(p, 7, 3, 10, 1.0, b);
  CHECK(ra.tokens == rb.tokens);
  CHECK(ra.old_logps == rb.old_logps);
  CHECK(ra.buckets == rb.buckets);
}

TEST_CASE("sample_rollout: old_logps are recorded at temperature 1") {
  auto p = PolicyParams::zeros(8, 3, 1);
  p.logit(0, 0) = 1.0;  // every bucket row differs from uniform in bucket 0
  RngStream rng(5);
  const auto r = sample_rollout(p, 3, 2, 6, 0.5, rng);
  for (std::size_t t = 0; t < r.tokens.size(); ++t)
    CHECK(r.old_logps[t] ==
          doctest::Approx(log_prob(p, r.buckets[t], r.tokens[t]))
              .epsilon(1e-12));
}

TEST_CASE("sample_rollout: uniform frequencies within Monte-Carlo bounds") {
  auto p = PolicyParams::zeros(8, 3, 0);
  const int samples = 10000;
  int counts[3] = {0, 0, 0};
  RngStream rng(77);
  for (int i = 0; i < samples; ++i) {
    const auto r = sample_rollout(p, 11, /*eos=*/2, /*max_len=*/1, 1.0, rng);
    counts[r.tokens[0]]++;
  }
  const double expect = samples / 3.0;
  const double sigma = std::sqrt(samples * (1.0 / 3) * (2.0 / 3));
  for (int c : counts) CHECK(std::abs(c - expect) < 3 * sigma);
}

TEST_CASE("apply_gradient") {
  auto p = PolicyParams::zeros(2, 3, 0);
  auto g = GradTable::zeros_like(p);

  apply_gradient(p, g, 0.5);  // zero gradient
  for (double x : p.logits) CHECK(x == 0.0);

  g.at(1, 2) = 1.0;
  apply_gradient(p, g, 0.0);  // zero step
  for (double x : p.logits) CHECK(x == 0.0);

  apply_gradient(p, g, 0.1);
  CHECK(p.logit(1, 2) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(p.logit(0, 0) == 0.0);

  GradTable bad;
  bad.values.assign(4, 0.0);
  CHECK_THROWS_AS(apply_gradient(p, bad, 0.1), std::invalid_argument);
}

TEST_CASE("checkpoint round-trip") {
  RngStream rng(21);
  auto p = PolicyParams::zeros(8, 4, 2, 123);
  for (double& x : p.logits) x = rng.normal();
  const auto path = std::filesystem::temp_directory_path() / "gmpo_ckpt_test.txt";
  save_checkpoint(p, path);
  const auto q = load_checkpoint(path);
  CHECK(q.num_buckets == p.num_buckets);
  CHECK(q.vocab_size == p.vocab_size);
  CHECK(q.context_order == p.context_order);
  CHECK(q.seed == p.seed);
  CHECK(q.logits == p.logits);  // shortest round-trip formatting is lossless
  std::filesystem::remove(path);
}
