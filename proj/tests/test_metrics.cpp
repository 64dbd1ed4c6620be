#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ersft/error.hpp"
#include "ersft/metrics.hpp"
#include "ersft/random.hpp"

using namespace ersft;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// Full sort with the (score desc, id asc) order; position of target, 1-based.
int brute_rank(const Vector& scores, int target) {
  std::vector<int> ids(static_cast<std::size_t>(scores.size()));
  std::iota(ids.begin(), ids.end(), 0);
  std::sort(ids.begin(), ids.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return static_cast<int>(std::find(ids.begin(), ids.end(), target) - ids.begin()) + 1;
}

}  // namespace

TEST(Metrics, RankOfTarget) {
  EXPECT_EQ(rank_of_target(vec({0.2, 0.5, 0.3}), 2), 2);
  EXPECT_EQ(rank_of_target(vec({0.2, 0.5, 0.3}), 1), 1);
  // Ties go to the smaller id.
  EXPECT_EQ(rank_of_target(vec({0.4, 0.4, 0.2}), 0), 1);
  EXPECT_EQ(rank_of_target(vec({0.4, 0.4, 0.2}), 1), 2);
}

TEST(Metrics, RankMatchesBruteForceSort) {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(11));
    Vector scores(n);
    // Coarse values so ties are common.
    for (int a = 0; a < n; ++a) scores[a] = static_cast<double>(rng.index(4));
    for (int t = 0; t < n; ++t) ASSERT_EQ(rank_of_target(scores, t), brute_rank(scores, t));
  }
}

TEST(Metrics, GoldenValues) {
  const std::vector<int> ranks{1, 3};
  EXPECT_DOUBLE_EQ(hit_rate_at(ranks, 1), 0.5);
  EXPECT_DOUBLE_EQ(hit_rate_at(ranks, 3), 1.0);
  EXPECT_DOUBLE_EQ(ndcg_at(ranks, 10), 0.75);
  EXPECT_DOUBLE_EQ(ndcg_at(ranks, 2), 0.5);
  EXPECT_DOUBLE_EQ(mean_reciprocal_rank(ranks), (1.0 + 1.0 / 3.0) / 2.0);
}

TEST(Metrics, NdcgNeverExceedsHitRate) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> ranks(1 + rng.index(20));
    for (auto& r : ranks) r = 1 + static_cast<int>(rng.index(60));
    for (int k : {1, 5, 10, 50}) {
      const double hr = hit_rate_at(ranks, k);
      const double nd = ndcg_at(ranks, k);
      EXPECT_LE(nd, hr + 1e-15);
      EXPECT_GE(nd, 0.0);
      EXPECT_LE(hr, 1.0);
    }
    EXPECT_LE(mean_reciprocal_rank(ranks), 1.0);
  }
}

TEST(Metrics, EmptyAndInvalidInputs) {
  const std::vector<int> none;
  EXPECT_THROW(hit_rate_at(none, 10), EmptySetError);
  EXPECT_THROW(ndcg_at(none, 10), EmptySetError);
  EXPECT_THROW(mean_reciprocal_rank(none), EmptySetError);
  const std::vector<int> one{1};
  EXPECT_THROW(hit_rate_at(one, 0), ParameterError);

  const Scorer flat = [](const Context&) { return vec({1.0, 1.0}); };
  const std::vector<TestCase> cases{{0, {}, 1, 3.0}};
  MetricSettings settings;
  settings.threshold = 4.0;
  EXPECT_THROW(compute_metrics(flat, cases, settings), EmptySetError);
}

TEST(Metrics, MonotoneTransformLeavesMetricsUnchanged) {
  Rng rng(3);
  std::vector<TestCase> cases;
  Matrix probs(6, 12);
  for (int s = 0; s < 6; ++s) {
    for (int a = 0; a < 12; ++a) probs(s, a) = 0.05 + rng.uniform();
    probs.row(s) /= probs.row(s).sum();
    for (int k = 0; k < 5; ++k) cases.push_back({s, {}, static_cast<int>(rng.index(12)), 5.0});
  }
  const TabularPolicy policy(probs);
  const Scorer raw = scorer_for(policy);
  const Scorer logged = [&](const Context& c) -> Vector {
    return (3.0 * raw(c).array().log() - 7.0).matrix();
  };
  const auto a = compute_metrics(raw, cases);
  const auto b = compute_metrics(logged, cases);
  EXPECT_EQ(a.hr10, b.hr10);
  EXPECT_EQ(a.ndcg10, b.ndcg10);
  EXPECT_EQ(a.ndcg50, b.ndcg50);
  EXPECT_EQ(a.mrr, b.mrr);
  EXPECT_EQ(a.n_cases, 30u);
}

TEST(Metrics, ThresholdFilterAndExcludedHistory) {
  const Scorer scorer = [](const Context&) { return vec({0.9, 0.8, 0.7, 0.1}); };
  std::vector<TestCase> cases{{0, {0, 1}, 2, 5.0}, {0, {}, 3, 4.0}};
  MetricSettings settings;
  settings.threshold = 4.5;
  auto ranks = target_ranks(scorer, cases, settings);
  ASSERT_EQ(ranks, (std::vector<int>{3}));
  settings.exclude_history = true;
  ranks = target_ranks(scorer, cases, settings);
  ASSERT_EQ(ranks, (std::vector<int>{1}));
  // The target itself is never excluded.
  EXPECT_EQ(rank_of_target(vec({0.9, 0.8, 0.7}), 1, std::vector<int>{1, 0}), 1);
}

TEST(Metrics, SyntheticCasesRespectThreshold) {
  const auto env = make_low_rank_env(5, 20, 2, 1.0, 1.0, 4, NoiseModel::gaussian(0.3));
  const auto cases = sample_test_cases(env, 2000, 0.8, 9);
  ASSERT_FALSE(cases.empty());
  for (const auto& c : cases) EXPECT_GE(c.target_rating, 0.8);
  const auto again = sample_test_cases(env, 2000, 0.8, 9);
  ASSERT_EQ(again.size(), cases.size());
  EXPECT_EQ(again.back().target, cases.back().target);
}

TEST(Metrics, OracleValueOfUniformPolicy) {
  const auto env = make_low_rank_env(4, 10, 2, 1.0, 1.0, 6);
  const double expected = env.context_dist.dot(env.true_reward.rowwise().mean());
  EXPECT_NEAR(oracle_value(env, TabularPolicy::uniform(4, 10)), expected, 1e-14);
}
