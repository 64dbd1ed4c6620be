#include <gtest/gtest.h>

#include <cmath>

#include "ersft/bounds.hpp"
#include "ersft/error.hpp"

using namespace ersft;

TEST(Bounds, ClosedFormGoldens) {
  EXPECT_NEAR(epsilon_of(1.0, 1, 2.0 * std::exp(-2.0)), 2.0, 1e-15);
  EXPECT_NEAR(tv_bound(0.1, 1.0), 0.11070137908008491696, 1e-16);
  EXPECT_NEAR(value_slack(0.1, 1.0, 1.0), 0.22140275816016983392, 1e-16);
  EXPECT_NEAR(linearized_slack(0.1, 1.0, 1.0), 0.4, 1e-16);
  EXPECT_NEAR(min_safe_lambda_for_epsilon(0.5, 1.0, 1.0), 1.4426950408889634074, 1e-15);
  EXPECT_NEAR(epsilon_uniform(1.0, 10, 5, 0.05), epsilon_of(1.0, 50, 0.05), 1e-15);
}

TEST(Bounds, EpsilonGrowsLogarithmicallyInActions) {
  // eps^2 / (2 sigma^2) = ln(2|A|/delta), so a tenfold |A| adds ln 10.
  for (int a : {10, 100, 1000}) {
    const double lo = epsilon_of(0.7, a, 0.05);
    const double hi = epsilon_of(0.7, 10 * a, 0.05);
    EXPECT_NEAR((hi * hi - lo * lo) / (2 * 0.49), std::log(10.0), 1e-12);
  }
  EXPECT_NEAR(epsilon_of(2.0, 7, 0.1), 2.0 * epsilon_of(1.0, 7, 0.1), 1e-14);
}

TEST(Bounds, MinSafeLambdaHitsTheTolerance) {
  for (double tau : {0.01, 0.1, 1.0, 5.0}) {
    const double lam = min_safe_lambda(0.3, 20, 0.05, tau, 2.0);
    const double eps = epsilon_of(0.3, 20, 0.05);
    EXPECT_NEAR(value_slack(eps, lam, 2.0), tau, 1e-12 * std::max(1.0, tau));
    EXPECT_GT(value_slack(eps, 0.99 * lam, 2.0), tau);
  }
  EXPECT_THROW(min_safe_lambda(0.3, 20, 0.05, 0.0, 1.0), ParameterError);
}

TEST(Bounds, ClaimsShrinkWithLambda) {
  double prev_slack = INFINITY;
  double prev_tv = INFINITY;
  for (double lam : {0.05, 0.1, 0.5, 1.0, 5.0, 50.0}) {
    EXPECT_LT(value_slack(0.1, lam, 1.0), prev_slack);
    EXPECT_LT(tv_bound(0.1, lam), prev_tv);
    EXPECT_GE(value_slack(0.1, lam, 1.0), 2.0 * 0.1 / lam);  // e^x - 1 >= x
    prev_slack = value_slack(0.1, lam, 1.0);
    prev_tv = tv_bound(0.1, lam);
  }
}

TEST(Bounds, BinomialUpperLimitGoldens) {
  EXPECT_NEAR(binomial_upper_limit(0, 10000, 0.01), 0.00046041099691215447154, 1e-15);
  EXPECT_NEAR(binomial_upper_limit(3, 100, 0.05), 0.075710793749830052885, 1e-13);
  EXPECT_EQ(binomial_upper_limit(5, 5, 0.05), 1.0);
}

TEST(Bounds, Prop1HoldsOnRandomInstances) {
  Prop1Config c;
  c.n_instances = 60;
  c.seed = 3;
  const auto report = check_prop1(c);
  EXPECT_EQ(report.violations, 0u);
  EXPECT_TRUE(report.passed);
  EXPECT_GT(report.n_checks, 60u);
  EXPECT_GE(report.realized.min, -1e-12);
}

TEST(Bounds, Thm1WithVanishingNoiseHasNoNegativeGap) {
  const auto env = random_bandit_env(2, 30, 1.0, 4);
  Thm1Config c;
  c.sigma = 1e-9;
  c.n_trials = 300;
  c.seed = 1;
  const auto report = check_thm1(env, c);
  EXPECT_GE(report.realized.min, -1e-6);
  EXPECT_EQ(report.violations, 0u);
  EXPECT_TRUE(report.passed);
}

TEST(Bounds, Thm1HoldsAndIsIndependentOfThreads) {
  const auto env = random_bandit_env(1, 200, 1.0, 5);
  Thm1Config c;
  c.lambda = 0.5;
  c.n_trials = 2000;
  c.seed = 2;
  const auto serial = check_thm1(env, c);
  c.n_threads = 4;
  const auto parallel = check_thm1(env, c);
  EXPECT_EQ(serial.to_json().dump(), parallel.to_json().dump());
  EXPECT_TRUE(serial.passed);
  EXPECT_NEAR(serial.claimed, 2.0 * epsilon_of(1.0, 200, 0.05), 1e-15);
}

TEST(Bounds, InjectedNoiseBreaksTheConditioningEvent) {
  const auto env = random_bandit_env(1, 50, 1.0, 6);
  Thm1Config c;
  c.n_trials = 200;
  c.inject = 3.0;
  const auto report = check_thm1(env, c);
  EXPECT_EQ(report.extra["conditioning_failures"].get<std::size_t>(), 200u);
}

TEST(Bounds, Thm2HoldsForBoundedNoise) {
  for (double eps : {0.05, 0.3}) {
    for (double lam : {0.2, 5.0}) {
      const auto env = random_bandit_env(2, 40, 1.0, 7, NoiseModel::bounded_uniform(eps));
      Thm2Config c;
      c.lambda = lam;
      c.n_trials = 200;
      const auto report = check_thm2(env, c);
      EXPECT_EQ(report.violations, 0u) << report.to_json().dump();
      EXPECT_LE(report.extra["tv"]["max"].get<double>(), tv_bound(eps, lam));
      EXPECT_EQ(report.extra["linearized_slack"].is_null(), lam < 2 * eps);
    }
  }
}

TEST(Bounds, Thm2WithoutNoiseHasZeroDistance) {
  const auto env = random_bandit_env(2, 10, 1.0, 8);
  Thm2Config c;
  c.n_trials = 20;
  const auto report = check_thm2(env, c);
  EXPECT_EQ(report.extra["tv"]["max"].get<double>(), 0.0);
  EXPECT_EQ(report.claimed, 0.0);
  EXPECT_TRUE(report.passed);
}

TEST(Bounds, Thm2RejectsUnboundedNoise) {
  const auto env = random_bandit_env(1, 10, 1.0, 9, NoiseModel::gaussian(0.1));
  EXPECT_THROW(check_thm2(env, {}), ParameterError);
}
