#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ersft/bandit.hpp"
#include "ersft/metrics.hpp"
#include "ersft/policy.hpp"

namespace ersft {

enum class Algorithm { kBc, kRsft, kExpRsft };

std::string algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

struct TrainConfig {
  Algorithm algorithm = Algorithm::kExpRsft;
  std::optional<double> lambda;  // required iff exp_rsft
  bool standardize_rewards = false;
  bool clamp_negative_weights = false;  // rsft only
  // Divide every weight by the dataset mean weight (computed once, in the log
  // domain). A constant rescaling of the loss, i.e. a learning-rate change.
  bool normalize_weights = false;
  double learning_rate = 0.1;
  int epochs = 10;
  int batch_size = 256;
  std::uint64_t seed = 0;
  bool trajectory_mode = false;

  void validate() const;
  /// Standardization defaults on for trajectories and off for bandit data.
  static TrainConfig defaults(Algorithm algorithm, bool trajectory_mode = false);
};

/// Mean and standard deviation of the training rewards (trajectory returns in
/// trajectory mode), computed once before training.
struct RewardStats {
  double mean = 0.0;
  double stddev = 0.0;
};

RewardStats reward_stats(const OfflineDataset& ds, bool trajectory_mode);

/// bc -> 1; rsft -> r (or max(r, 0) when clamping); exp_rsft -> exp(r'/lambda)
/// with r' optionally standardized. Throws DivergenceError on overflow.
double example_weight(double reward, const TrainConfig& config, const RewardStats& stats = {});

struct WeightSummary {
  std::vector<double> weights;  // one per training unit
  std::size_t negative = 0;
  double normalizer = 1.0;  // the divisor applied when normalize_weights is set
};

/// Per-unit weights (interactions, or trajectories in trajectory mode).
WeightSummary training_weights(const OfflineDataset& ds, const TrainConfig& config);

/// One weighted unit of the loss: a single interaction, or a whole trajectory.
struct BatchUnit {
  std::span<const LoggedInteraction> steps;
  double weight = 1.0;
};

struct LossGradient {
  double loss = 0.0;
  ModelGradient gradient;
};

/// loss = -(1/|B|) sum_u w_u sum_t log pi(a_t | s_t), with the analytic gradient
/// d loss / d logits(s) = (w/|B|) (softmax(logits(s)) - onehot(a)).
LossGradient weighted_nll_loss(const ParametricPolicy& policy, const OfflineDataset& ds,
                               std::span<const BatchUnit> batch);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  std::optional<double> true_value;
  std::optional<double> kl_to_tilt;
  std::optional<MetricsReport> metrics;
};

struct TrainTrace {
  std::vector<EpochRecord> records;
  std::size_t negative_weights = 0;

  /// epoch,loss,true_value,kl_to_tilt,ndcg10,ndcg50,hr10,hr50,mrr
  std::string to_csv() const;
};

using EpochObserver = std::function<void(const ParametricPolicy&, EpochRecord&)>;

struct TrainResult {
  ParametricPolicy policy;
  TrainTrace trace;
};

/// Mini-batch SGD on the weighted likelihood with a seeded reshuffle per epoch.
/// `observer` fills evaluation columns after each epoch.
TrainResult train(const OfflineDataset& ds, const TrainConfig& config, ParametricPolicy initial,
                  const EpochObserver& observer = {});

/// Empirical per-context action frequencies (uniform rows for unseen contexts).
TabularPolicy empirical_logging_policy(const OfflineDataset& ds);
/// Mean logged reward per (s, a); -inf where (s, a) was never logged.
Matrix empirical_mean_rewards(const OfflineDataset& ds);
/// Exact tilt of the empirical logging policy by the empirical mean rewards.
TabularPolicy empirical_tilt(const OfflineDataset& ds, double lambda);

/// KL(reference(.|s) || policy(.|s)) averaged under `weights` over contexts.
double mean_projection_kl(const TabularPolicy& reference, const TabularPolicy& policy,
                          const Vector& weights);
double max_projection_kl(const TabularPolicy& reference, const TabularPolicy& policy,
                         const Vector& weights);

/// Observer recording oracle value, metrics on `cases` (if any) and the KL to
/// `reference` (if given). Captures its arguments by reference.
EpochObserver oracle_observer(const SyntheticEnvironment& env, std::span<const TestCase> cases,
                              MetricSettings settings,
                              const std::optional<TabularPolicy>& reference = std::nullopt,
                              const Vector* reference_weights = nullptr);

struct SweepMetrics {
  double oracle_value = 0.0;
  double ndcg10 = 0.0;
  double ndcg50 = 0.0;
  double hr10 = 0.0;
  double hr50 = 0.0;
  double mrr = 0.0;
};

struct SweepRow {
  double lambda = 0.0;
  SweepMetrics best;   // per-metric maximum over completed epochs
  SweepMetrics final;  // last epoch
  TrainTrace trace;
};

/// Trains one exp_rsft policy per lambda from `initial` (shared seed) and
/// evaluates every epoch. Runs are independent and may execute on
/// `n_threads` workers; results do not depend on the thread count.
std::vector<SweepRow> lambda_sweep(const OfflineDataset& ds, const SyntheticEnvironment& env,
                                   std::span<const TestCase> cases,
                                   std::span<const double> lambda_grid,
                                   const TrainConfig& config_base, const ParametricPolicy& initial,
                                   const MetricSettings& settings, int n_threads = 1);

SweepMetrics sweep_metrics(const EpochRecord& record);

}  // namespace ersft
