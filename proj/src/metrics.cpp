#include "ersft/metrics.hpp"

#include <cmath>
#include <sstream>

#include "ersft/error.hpp"
#include "ersft/policy.hpp"
#include "ersft/tilt.hpp"

namespace ersft {

Scorer scorer_for(const ParametricPolicy& policy) {
  return [&policy](const Context& c) { return policy.logits(c); };
}

Scorer scorer_for(const TabularPolicy& policy) {
  return [&policy](const Context& c) -> Vector { return policy.row(c.id); };
}

namespace {

void check_target(const Vector& scores, int target) {
  if (target < 0 || target >= scores.size()) {
    throw ParameterError("target " + std::to_string(target) + " outside the action range");
  }
}

void check_k(int k) {
  if (k < 1) throw ParameterError("cutoff K must be >= 1");
}

}  // namespace

int rank_of_target(const Vector& scores, int target) {
  check_target(scores, target);
  const double t = scores[target];
  int rank = 1;
  for (Eigen::Index a = 0; a < scores.size(); ++a) {
    if (scores[a] > t || (scores[a] == t && a < target)) ++rank;
  }
  return rank;
}

int rank_of_target(const Scorer& scorer, const Context& context, int target) {
  return rank_of_target(scorer(context), target);
}

int rank_of_target(const Vector& scores, int target, std::span<const int> excluded) {
  check_target(scores, target);
  if (excluded.empty()) return rank_of_target(scores, target);
  std::vector<char> skip(static_cast<std::size_t>(scores.size()), 0);
  for (int a : excluded) {
    if (a >= 0 && a < scores.size() && a != target) skip[static_cast<std::size_t>(a)] = 1;
  }
  const double t = scores[target];
  int rank = 1;
  for (Eigen::Index a = 0; a < scores.size(); ++a) {
    if (skip[static_cast<std::size_t>(a)]) continue;
    if (scores[a] > t || (scores[a] == t && a < target)) ++rank;
  }
  return rank;
}

double hit_rate_at(std::span<const int> ranks, int k) {
  check_k(k);
  if (ranks.empty()) throw EmptySetError("no ranks to average");
  double hits = 0.0;
  for (int r : ranks) hits += r <= k ? 1.0 : 0.0;
  return hits / static_cast<double>(ranks.size());
}

double ndcg_at(std::span<const int> ranks, int k) {
  check_k(k);
  if (ranks.empty()) throw EmptySetError("no ranks to average");
  // One relevant item per case, so the ideal DCG is 1.
  double total = 0.0;
  for (int r : ranks) {
    if (r <= k) total += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  }
  return total / static_cast<double>(ranks.size());
}

double mean_reciprocal_rank(std::span<const int> ranks) {
  if (ranks.empty()) throw EmptySetError("no ranks to average");
  double total = 0.0;
  for (int r : ranks) total += 1.0 / static_cast<double>(r);
  return total / static_cast<double>(ranks.size());
}

std::vector<int> target_ranks(const Scorer& scorer, std::span<const TestCase> cases,
                              const MetricSettings& settings) {
  std::vector<int> ranks;
  for (const auto& tc : cases) {
    if (!(tc.target_rating >= settings.threshold)) continue;
    const Vector scores = scorer(tc.view());
    ranks.push_back(settings.exclude_history ? rank_of_target(scores, tc.target, tc.history)
                                             : rank_of_target(scores, tc.target));
  }
  return ranks;
}

MetricsReport compute_metrics(const Scorer& scorer, std::span<const TestCase> cases,
                              const MetricSettings& settings) {
  const auto ranks = target_ranks(scorer, cases, settings);
  if (ranks.empty()) {
    throw EmptySetError("no test case has rating >= " + std::to_string(settings.threshold));
  }
  MetricsReport m;
  m.hr10 = hit_rate_at(ranks, 10);
  m.hr50 = hit_rate_at(ranks, 50);
  m.ndcg10 = ndcg_at(ranks, 10);
  m.ndcg50 = ndcg_at(ranks, 50);
  m.mrr = mean_reciprocal_rank(ranks);
  m.n_cases = ranks.size();
  return m;
}

MetricsReport compute_metrics(const ParametricPolicy& policy, std::span<const TestCase> cases,
                              const MetricSettings& settings) {
  return compute_metrics(scorer_for(policy), cases, settings);
}

double oracle_value(const SyntheticEnvironment& env, const TabularPolicy& policy) {
  return policy_value(env, policy).expected;
}

double oracle_value(const SyntheticEnvironment& env, const ParametricPolicy& policy) {
  return oracle_value(env, policy.table());
}

std::vector<TestCase> sample_test_cases(const SyntheticEnvironment& env, int n_draws,
                                        double threshold, std::uint64_t seed) {
  if (n_draws < 0) throw ParameterError("n_draws must be >= 0");
  env.validate();
  Rng rng = make_stream(seed, "eval", 0);
  const auto d0 = std::span<const double>(env.context_dist.data(),
                                          static_cast<std::size_t>(env.context_dist.size()));
  std::vector<TestCase> cases;
  for (int i = 0; i < n_draws; ++i) {
    const int s = static_cast<int>(rng.categorical(d0));
    const Vector row = env.logging_policy.row(s);
    const int a = static_cast<int>(rng.categorical(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
    const double r_hat = env.noise.observe(env.true_reward(s, a), env.r_max, rng);
    if (r_hat >= threshold) cases.push_back(TestCase{s, {}, a, r_hat});
  }
  return cases;
}

std::string metrics_csv_row(const std::string& algo, int epoch, const MetricsReport& m) {
  std::ostringstream out;
  out.precision(10);
  out << algo << ',' << epoch << ',' << m.n_cases << ',' << m.hr10 << ',' << m.hr50 << ','
      << m.ndcg10 << ',' << m.ndcg50 << ',' << m.mrr << ',';
  if (m.avg_reward) out << *m.avg_reward;
  out << ',';
  if (m.oracle_value) out << *m.oracle_value;
  return out.str();
}

}  // namespace ersft
