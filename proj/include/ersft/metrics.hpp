#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ersft/bandit.hpp"
#include "ersft/linalg.hpp"
#include "ersft/tabular_policy.hpp"

namespace ersft {

class ParametricPolicy;

/// Held-out next-item case. Kept for evaluation iff target_rating >= threshold.
struct TestCase {
  int context = 0;
  std::vector<int> history;
  int target = 0;
  double target_rating = 0.0;

  Context view() const { return Context{context, history}; }
};

struct MetricsReport {
  double hr10 = 0.0;
  double hr50 = 0.0;
  double ndcg10 = 0.0;
  double ndcg50 = 0.0;
  double mrr = 0.0;
  std::size_t n_cases = 0;
  std::optional<double> avg_reward;
  std::optional<double> oracle_value;
};

struct MetricSettings {
  double threshold = 4.5;
  // Drop previously-interacted items (other than the target) from the ranking.
  bool exclude_history = false;
};

/// Per-context action scores; any strictly increasing map of the policy's
/// probabilities ranks identically.
using Scorer = std::function<Vector(const Context&)>;

Scorer scorer_for(const ParametricPolicy& policy);
Scorer scorer_for(const TabularPolicy& policy);

/// 1 + #{strictly higher score} + #{equal score with smaller action id}.
int rank_of_target(const Vector& scores, int target);
int rank_of_target(const Scorer& scorer, const Context& context, int target);

/// Rank with candidates in `excluded` removed (target is never excluded).
int rank_of_target(const Vector& scores, int target, std::span<const int> excluded);

double hit_rate_at(std::span<const int> ranks, int k);
double ndcg_at(std::span<const int> ranks, int k);
double mean_reciprocal_rank(std::span<const int> ranks);

/// Ranks for the filtered cases, in input order.
std::vector<int> target_ranks(const Scorer& scorer, std::span<const TestCase> cases,
                              const MetricSettings& settings = {});

/// HR@{10,50}, NDCG@{10,50} and MRR over cases with target_rating >= threshold.
/// Throws EmptySetError when no case survives the filter.
MetricsReport compute_metrics(const Scorer& scorer, std::span<const TestCase> cases,
                              const MetricSettings& settings = {});
MetricsReport compute_metrics(const ParametricPolicy& policy, std::span<const TestCase> cases,
                              const MetricSettings& settings = {});

/// E_{s~d0}[V^pi(s)] under the environment's true rewards.
double oracle_value(const SyntheticEnvironment& env, const TabularPolicy& policy);
double oracle_value(const SyntheticEnvironment& env, const ParametricPolicy& policy);

/// Synthetic held-out cases: draws (s, a, r_hat) from the logging process on
/// the stream (seed, "eval") and keeps those with r_hat >= threshold.
std::vector<TestCase> sample_test_cases(const SyntheticEnvironment& env, int n_draws,
                                        double threshold, std::uint64_t seed);

/// CSV header shared by metric emitters.
inline constexpr const char* kMetricsCsvHeader =
    "algo,epoch,n_cases,hr10,hr50,ndcg10,ndcg50,mrr,avg_reward,oracle_value";
std::string metrics_csv_row(const std::string& algo, int epoch, const MetricsReport& m);

}  // namespace ersft
