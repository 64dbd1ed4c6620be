#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "ersft/error.hpp"
#include "ersft/random.hpp"
#include "ersft/tilt.hpp"

using namespace ersft;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

TabularPolicy random_policy(Rng& rng, int n_s, int n_a, double sharpness = 1.0) {
  Matrix p(n_s, n_a);
  for (int s = 0; s < n_s; ++s) {
    Vector logits(n_a);
    for (int a = 0; a < n_a; ++a) logits[a] = sharpness * rng.normal();
    p.row(s) = softmax(logits).transpose();
  }
  return TabularPolicy(p);
}

}  // namespace

// Reference values computed with 40-digit arithmetic.
TEST(Tilt, ThreeActionGolden) {
  double log_z = 0.0;
  const Vector pi = exp_tilt_row(vec({0.5, 0.3, 0.2}), vec({1, 0, 2}), 1.0, &log_z);
  EXPECT_NEAR(pi[0], 0.43326797992600189925, 1e-14);
  EXPECT_NEAR(pi[1], 0.095634229399594361048, 1e-14);
  EXPECT_NEAR(pi[2], 0.4710977906744037397, 1e-14);
  EXPECT_NEAR(std::exp(log_z), 3.1369521340156526631, 1e-13);
  EXPECT_NEAR(row_value(pi, vec({1, 0, 2})), 1.3754635612748093787, 1e-13);
  EXPECT_NEAR(kl_to_reference(pi, vec({0.5, 0.3, 0.2})), 0.23221189070494636459, 1e-13);
}

TEST(Tilt, ConstantRewardKeepsBase) {
  const Vector base = vec({0.1, 0.6, 0.3});
  const Vector pi = exp_tilt_row(base, vec({0.7, 0.7, 0.7}), 0.01);
  EXPECT_LT((pi - base).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Tilt, LargeLambdaApproachesBase) {
  const Vector base = vec({0.25, 0.25, 0.5});
  const Vector pi = exp_tilt_row(base, vec({0, 1, 0.5}), 1e9);
  EXPECT_LT(tv_distance(pi, base), 1e-9);
}

TEST(Tilt, SmallLambdaConcentratesOnBestSupportedAction) {
  const Vector pi = exp_tilt_row(vec({0.9, 0.05, 0.05}), vec({0.2, 0.9, 0.5}), 1e-3);
  EXPECT_NEAR(pi[1], 1.0, 1e-12);
}

TEST(Tilt, HugeRewardsStayFinite) {
  double log_z = 0.0;
  const Vector pi = exp_tilt_row(vec({0.5, 0.5}), vec({1000, 999}), 1.0, &log_z);
  EXPECT_TRUE(pi.allFinite());
  EXPECT_NEAR(pi[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-14);
  EXPECT_NEAR(log_z, 1000.0 + std::log(0.5 * (1.0 + std::exp(-1.0))), 1e-10);
}

TEST(Tilt, RejectsBadInputs) {
  EXPECT_THROW(exp_tilt_row(vec({0.5, 0.5}), vec({0, 1}), 0.0), ParameterError);
  EXPECT_THROW(exp_tilt_row(vec({0.5, 0.5}), vec({0, 1}), -1.0), ParameterError);
  EXPECT_THROW(exp_tilt_row(vec({0.5, 0.5}), vec({0, std::nan("")}), 1.0), ParameterError);
  EXPECT_THROW(exp_tilt_row(vec({1.0, 0.0}), vec({0, 1}), 1.0), SupportError);
}

TEST(Tilt, ZeroBaseWithMinusInfinityIsExcluded) {
  const double ninf = -std::numeric_limits<double>::infinity();
  const Vector pi = exp_tilt_row(vec({1.0, 0.0}), vec({0.3, ninf}), 1.0);
  EXPECT_DOUBLE_EQ(pi[0], 1.0);
  EXPECT_DOUBLE_EQ(pi[1], 0.0);
}

TEST(Tilt, KlGolden) {
  EXPECT_NEAR(kl_divergence(vec({0.75, 0.25}), vec({0.5, 0.5})), 0.13081203594113695913, 1e-15);
  EXPECT_DOUBLE_EQ(kl_divergence(vec({0.5, 0.5}), vec({0.5, 0.5})), 0.0);
  EXPECT_THROW(kl_divergence(vec({0.5, 0.5}), vec({1.0, 0.0})), SupportError);
  EXPECT_DOUBLE_EQ(kl_divergence(vec({1.0, 0.0}), vec({0.5, 0.5})), std::log(2.0));
}

TEST(Tilt, TvDistance) {
  EXPECT_DOUBLE_EQ(tv_distance(vec({1, 0}), vec({0, 1})), 1.0);
  EXPECT_DOUBLE_EQ(tv_distance(vec({0.5, 0.5}), vec({0.25, 0.75})), 0.25);
}

TEST(Tilt, ShiftAndScaleInvarianceOnRandomInstances) {
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const int n_s = 1 + static_cast<int>(rng.index(8));
    const int n_a = 2 + static_cast<int>(rng.index(30));
    const TabularPolicy base = random_policy(rng, n_s, n_a, 2.0);
    Matrix r(n_s, n_a);
    for (Eigen::Index k = 0; k < r.size(); ++k) r.data()[k] = rng.uniform(-2.0, 2.0);
    const double lambda = std::exp(rng.uniform(-2.0, 2.0));
    const double scale = std::exp(rng.uniform(-2.0, 2.0));
    Vector shift(n_s);
    for (int s = 0; s < n_s; ++s) shift[s] = rng.uniform(-50.0, 50.0);
    const auto report = invariance_check(base, r, lambda, shift, scale);
    EXPECT_TRUE(report.passed(1e-10)) << report.shift_distance << " " << report.scale_distance;
  }
}

TEST(Tilt, PartitionRatioMatchesExpectedNoiseWeight) {
  Rng rng(5);
  const Vector base = random_policy(rng, 1, 20).row(0);
  Vector r(20), xi(20);
  for (int a = 0; a < 20; ++a) {
    r[a] = rng.uniform();
    xi[a] = rng.uniform(-0.3, 0.3);
  }
  double lz_clean = 0.0, lz_noisy = 0.0;
  const Vector clean = exp_tilt_row(base, r, 0.7, &lz_clean);
  exp_tilt_row(base, r + xi, 0.7, &lz_noisy);
  EXPECT_NEAR(std::exp(lz_noisy - lz_clean), expected_noise_weight(clean, xi, 0.7), 1e-13);
}

TEST(Tilt, PolicyValueAndAdvantage) {
  SyntheticEnvironment env;
  env.catalog = {2, 2};
  env.true_reward = (Matrix(2, 2) << 1, 0, 0.5, 0.5).finished();
  env.context_dist = vec({0.25, 0.75});
  env.logging_policy = TabularPolicy::uniform(2, 2);
  const PolicyValue v = policy_value(env, env.logging_policy);
  EXPECT_DOUBLE_EQ(v.per_context[0], 0.5);
  EXPECT_DOUBLE_EQ(v.expected, 0.5);
  EXPECT_DOUBLE_EQ(advantage(env, env.logging_policy, 0, 0), 0.5);
}

TEST(Tilt, ExactTiltImprovesValueOnEveryState) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    SyntheticEnvironment env;
    const int n_s = 5, n_a = 12;
    env.catalog = {n_s, n_a};
    env.true_reward.resize(n_s, n_a);
    for (Eigen::Index k = 0; k < env.true_reward.size(); ++k) env.true_reward.data()[k] = rng.uniform();
    env.context_dist = Vector::Constant(n_s, 1.0 / n_s);
    env.logging_policy = random_policy(rng, n_s, n_a, 2.0);
    const auto base = policy_value(env, env.logging_policy);
    const auto tilted = policy_value(env, exp_tilt(env.logging_policy, env.true_reward, 0.3).policy);
    EXPECT_GE((tilted.per_context - base.per_context).minCoeff(), -1e-12);
  }
}
