#include <gtest/gtest.h>

#include <cmath>

#include "ersft/error.hpp"
#include "ersft/rlhf.hpp"

using namespace ersft;

namespace {

ParametricPolicy small_policy(int n_s, int n_a, std::uint64_t seed = 1) {
  return ParametricPolicy({n_s, n_a, n_s, ContextEncoding::kOneHotTable, 0.3}, seed);
}

RewardModel random_rm(int n_s, int n_a, std::uint64_t seed) {
  RewardModelConfig c;
  c.dim = 3;
  c.init_scale = 1.0;
  c.seed = seed;
  return RewardModel(n_s, n_a, c);
}

RewardModel constant_rm(int n_s, int n_a, double value) {
  RewardModel rm = random_rm(n_s, n_a, 1);
  rm.model().mutable_item_embeddings().setZero();
  rm.model().mutable_item_bias().setZero();
  rm.set_global_bias(value);
  return rm;
}

std::vector<Context> all_contexts(int n_s) {
  std::vector<Context> out;
  for (int s = 0; s < n_s; ++s) out.push_back({s});
  return out;
}

}  // namespace

TEST(Ppo, ZeroAdvantageLeavesPolicyUnchanged) {
  auto policy = small_policy(3, 5);
  const auto before = policy;
  const auto contexts = all_contexts(3);
  Rng rng(2);
  // A constant RM gives zero group advantages.
  const auto batch = sample_ppo_batch(policy, contexts, constant_rm(3, 5, 0.5), 8, rng);
  ASSERT_EQ(batch.samples.size(), 24u);
  for (const auto& s : batch.samples) EXPECT_EQ(s.advantage, 0.0);
  const auto stats = ppo_update(policy, batch, PpoConfig{});
  EXPECT_EQ(stats.loss, 0.0);
  EXPECT_TRUE(policy == before);
}

TEST(Ppo, RatioOneGivesZeroSurrogateForGroupBaselines) {
  auto policy = small_policy(4, 6);
  const auto contexts = all_contexts(4);
  Rng rng(3);
  const auto batch = sample_ppo_batch(policy, contexts, random_rm(4, 6, 7), 8, rng);
  double sum = 0.0;
  for (const auto& s : batch.samples) sum += s.advantage;
  EXPECT_NEAR(sum, 0.0, 1e-12);
  const auto stats = ppo_update(policy, batch, PpoConfig{});
  EXPECT_NEAR(stats.loss, 0.0, 1e-12);
  EXPECT_NEAR(stats.unclipped_loss, 0.0, 1e-12);
  EXPECT_EQ(stats.clip_fraction, 0.0);
}

TEST(Ppo, RaisesExpectedRmScore) {
  const auto rm = random_rm(5, 8, 11);
  const auto contexts = all_contexts(5);
  const Vector d = Vector::Constant(5, 0.2);
  PpoConfig c;
  c.steps = 40;
  c.learning_rate = 5.0;
  c.seed = 4;
  const auto initial = small_policy(5, 8);
  const auto trained = run_ppo(initial, contexts, rm, c);
  EXPECT_GT(expected_reward_score(trained, rm, d), expected_reward_score(initial, rm, d) + 0.05);
  EXPECT_TRUE(run_ppo(initial, contexts, rm, c) == trained);
}

TEST(Ppo, ConfigValidation) {
  PpoConfig c;
  c.clip = -0.1;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.group_size = 1;
  EXPECT_THROW(c.validate(), ParameterError);
}

TEST(Dpo, LossIsLogTwoAtTheReference) {
  const Vector lp = Vector::LinSpaced(4, -2.0, -0.5);
  EXPECT_NEAR(dpo_pair_loss(lp, lp, 0, 3, 0.1), std::log(2.0), 1e-15);
  Vector moved = lp;
  moved[0] += 1.0;
  EXPECT_LT(dpo_pair_loss(moved, lp, 0, 3, 1.0), std::log(2.0));
  EXPECT_GT(dpo_pair_loss(moved, lp, 3, 0, 1.0), std::log(2.0));
}

TEST(Dpo, TinyBetaBarelyMovesThePolicy) {
  auto policy = small_policy(3, 6);
  const auto reference = policy;
  DpoConfig c;
  c.beta = 1e-8;
  Rng rng(5);
  const auto stats = dpo_step(policy, reference, all_contexts(3), random_rm(3, 6, 2), c, rng);
  EXPECT_GT(stats.pairs, 0u);
  EXPECT_NEAR(stats.loss, std::log(2.0), 1e-8);
  const auto a = policy.model().flatten();
  const auto b = reference.model().flatten();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-8);
}

TEST(Dpo, IdenticalSamplesAreSkipped) {
  auto policy = small_policy(2, 4);
  policy.model().mutable_item_bias() << 200.0, 0.0, 0.0, 0.0;
  const auto before = policy;
  DpoConfig c;
  c.pairs_per_context = 5;
  Rng rng(6);
  const auto stats = dpo_step(policy, before, all_contexts(2), random_rm(2, 4, 3), c, rng);
  EXPECT_EQ(stats.pairs, 0u);
  EXPECT_EQ(stats.skipped, 10u);
  EXPECT_TRUE(policy == before);
}

TEST(Dpo, TiesGoToTheLowerAction) {
  auto policy = small_policy(1, 2);
  const auto reference = policy;
  DpoConfig c;
  c.pairs_per_context = 50;
  c.beta = 1.0;
  Rng rng(7);
  const auto stats = dpo_step(policy, reference, all_contexts(1), constant_rm(1, 2, 0.0), c, rng);
  EXPECT_GT(stats.ties, 0u);
  EXPECT_EQ(stats.ties, stats.pairs);
  EXPECT_GT(policy.probs({0})[0], reference.probs({0})[0]);
}

TEST(AvgReward, ConstantRm) {
  const auto policy = small_policy(3, 4);
  const auto contexts = sample_contexts(Vector::Constant(3, 1.0 / 3), 50, 1);
  EXPECT_NEAR(avg_reward_score(policy, constant_rm(3, 4, 0.7), contexts, 5, 2), 0.7, 1e-14);
}

TEST(AvgReward, MonteCarloMatchesExpectation) {
  const auto policy = small_policy(6, 9, 3);
  const auto rm = random_rm(6, 9, 4);
  Vector d(6);
  d << 0.3, 0.1, 0.1, 0.2, 0.2, 0.1;
  const auto contexts = sample_contexts(d, 4000, 8);
  const int n_gen = 10;
  const double mc = avg_reward_score(policy, rm, contexts, n_gen, 9);
  const double exact = expected_reward_score(policy, rm, d);
  const Matrix table = rm.table();
  const double range = table.maxCoeff() - table.minCoeff();
  // Context draws are shared across generations, so count only contexts.
  const double sigma = range / 2.0 / std::sqrt(4000.0);
  EXPECT_NEAR(mc, exact, 4.0 * sigma);
}
