#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "gmpo/core.hpp"
#include "gmpo/rng.hpp"

using namespace gmpo;

TEST_CASE("normalize_group: hand-evaluated binary groups") {
  // {1, 0}: mean 0.5, population std 0.5
  auto adv = normalize_group(std::vector<double>{1, 0});
  CHECK(adv[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(adv[1] == doctest::Approx(-1.0).epsilon(1e-12));

  adv = normalize_group(std::vector<double>{1, 1, 0, 0});
  CHECK(adv[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(adv[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(adv[2] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(adv[3] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("normalize_group: zero-variance groups give exactly zero") {
  for (auto adv : {normalize_group(std::vector<double>{1, 1, 1, 1}),
                   normalize_group(std::vector<double>{0, 0})}) {
    for (double a : adv) CHECK(a == 0.0);
  }
}

TEST_CASE("normalize_group: rejects undersized groups") {
  CHECK_THROWS_AS(normalize_group(std::vector<double>{1}),
                  std::invalid_argument);
}

TEST_CASE("normalize_group: zero mean for any input") {
  RngStream rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int g = 2 + static_cast<int>(rng.uniform_int(14));
    std::vector<double> rewards(g);
    for (double& r : rewards) r = rng.uniform() < 0.5 ? 0.0 : 1.0;
    const auto adv = normalize_group(rewards);
    double mean = 0.0;
    for (double a : adv) mean += a;
    CHECK(std::abs(mean / g) < 1e-9);
  }
}

TEST_CASE("normalize_group: shift invariance and sign equivariance") {
  const std::vector<double> rewards{1, 0, 0, 1, 1};
  const auto base = normalize_group(rewards);

  std::vector<double> shifted(rewards);
  for (double& r : shifted) r += 3.25;
  const auto shifted_adv = normalize_group(shifted);
  for (std::size_t i = 0; i < base.size(); ++i)
    CHECK(shifted_adv[i] == doctest::Approx(base[i]).epsilon(1e-12));

  // negate centered rewards: advantages flip sign
  const double mean = 3.0 / 5.0;
  std::vector<double> negated(rewards);
  for (double& r : negated) r = mean - (r - mean);
  const auto negated_adv = normalize_group(negated);
  for (std::size_t i = 0; i < base.size(); ++i)
    CHECK(negated_adv[i] == doctest::Approx(-base[i]).epsilon(1e-12));
}

TEST_CASE("normalize_group: closed form for k ones out of G") {
  RngStream rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int g = 2 + static_cast<int>(rng.uniform_int(18));
    const int k = 1 + static_cast<int>(rng.uniform_int(g - 1));  // 0 < k < G
    std::vector<double> rewards(g, 0.0);
    for (int i = 0; i < k; ++i) rewards[i] = 1.0;
    const auto adv = normalize_group(rewards);
    const double pos = std::sqrt(static_cast<double>(g - k) / k);
    const double neg = -std::sqrt(static_cast<double>(k) / (g - k));
    for (int i = 0; i < g; ++i)
      CHECK(adv[i] == doctest::Approx(rewards[i] > 0.5 ? pos : neg)
                          .epsilon(1e-9));
  }
}

TEST_CASE("sgn: zero maps to -1") {
  CHECK(sgn(2.3) == 1.0);
  CHECK(sgn(-0.1) == -1.0);
  CHECK(sgn(0.0) == -1.0);
  CHECK_THROWS_AS(sgn(std::numeric_limits<double>::quiet_NaN()),
                  std::invalid_argument);
  CHECK_THROWS_AS(sgn(std::numeric_limits<double>::infinity()),
                  std::invalid_argument);
}

TEST_CASE("clip config validation") {
  CHECK_THROWS_AS(ClipConfig::token_log(0.1, 0.4), std::invalid_argument);
  CHECK_THROWS_AS(ClipConfig::token_log(-0.4, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(ClipConfig::grpo_linear(1.5), std::invalid_argument);
  const auto c = ClipConfig::grpo_linear(0.2);
  CHECK(c.lower_log == doctest::Approx(std::log(0.8)));
  CHECK(c.upper_log == doctest::Approx(std::log(1.2)));
}

TEST_CASE("rollout validation") {
  Rollout r;
  r.tokens = {1, 2};
  r.old_logps = {-0.5, -0.5};
  r.mask = {1, 1};
  CHECK_NOTHROW(r.validate());

  r.old_logps = {0.5, -0.5};
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);

  r.old_logps = {-0.5, -0.5};
  r.mask = {0, 0};
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);

  r.mask = {1};
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);
}
