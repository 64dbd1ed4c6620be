#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ersft/bandit.hpp"
#include "ersft/bounds.hpp"
#include "ersft/dataset_io.hpp"
#include "ersft/metrics.hpp"
#include "ersft/policy.hpp"
#include "ersft/reward_model.hpp"
#include "ersft/rlhf.hpp"
#include "ersft/train.hpp"

namespace ersft {

/// Every configurable field with its default. User documents are merged on
/// top of this (RFC 7386 merge patch), so a resolved config is always complete.
Json default_config();
/// Defaults patched with `user`; throws ParameterError for keys that do not exist.
Json resolve_config(const Json& user);
Json load_config(const std::filesystem::path& path);

LowRankEnvSpec env_spec_from(const Json& config);
/// dim 0 means full capacity (n_contexts) for one_hot and 8 otherwise.
PolicyShape policy_shape_from(const Json& config, int n_contexts, int n_actions);
TrainConfig train_config_from(const Json& config, Algorithm algorithm);
TrainConfig pretrain_config_from(const Json& config);
MetricSettings metric_settings_from(const Json& config);
/// dim 0 resolves like the policy: n_contexts for one_hot, 8 otherwise.
RewardModelConfig reward_model_config_from(const Json& config, int n_contexts);
PpoConfig ppo_config_from(const Json& config);
DpoConfig dpo_config_from(const Json& config);

/// Synthetic benchmark: environment, logged data, held-out cases and the
/// BC-pretrained starting policy shared by every algorithm.
struct Benchmark {
  Json config;
  SyntheticEnvironment env;
  OfflineDataset data;
  std::vector<TestCase> cases;
  ParametricPolicy base;
};

/// `pretrain` = false leaves `base` default-constructed (evaluation only).
Benchmark build_benchmark(const Json& config, bool pretrain = true);

struct Outcome {
  std::string algo;
  ParametricPolicy policy;
  TrainTrace trace;
  double oracle_value = 0.0;
  MetricsReport metrics;
};

/// Post-trains bc / rsft / exp_rsft from the pretrained base.
Outcome run_offline(const Benchmark& bench, Algorithm algorithm,
                    std::optional<double> lambda = std::nullopt);

struct SweepOutcome {
  std::vector<SweepRow> rows;
  Outcome bc;
};

SweepOutcome run_sweep(const Benchmark& bench, const std::vector<double>& grid);

/// Index of the maximum, and whether it lies strictly inside the grid and
/// strictly above both endpoints.
struct PeakInfo {
  std::size_t argmax = 0;
  bool interior = false;
};
PeakInfo find_peak(const std::vector<double>& values);

struct HackRow {
  std::string algo;
  double avg_rm_score = 0.0;
  double oracle_value = 0.0;
  double ndcg10 = 0.0;
};

struct HackCurvePoint {
  int step = 0;
  double avg_rm_score = 0.0;
  double oracle_value = 0.0;
  double ndcg10 = 0.0;
};

struct HackOutcome {
  RewardModelFit rm;
  std::vector<PredictorRow> predictors;  // on the held-out split
  std::vector<HackRow> summary;          // bc, rsft, exp_rsft, ppo, dpo
  std::vector<HackCurvePoint> ppo_curve;
  std::vector<HackCurvePoint> dpo_curve;
};

/// Trains the reward model on a split of the logged data, then compares the
/// offline algorithms with PPO and DPO optimized against it.
HackOutcome run_hack(const Benchmark& bench);

struct RmBaselineOutcome {
  RewardModelFit rm;
  std::vector<PredictorRow> rows;
};

RmBaselineOutcome run_rm_baselines(const OfflineDataset& data, const RewardModelConfig& config);

std::string sweep_csv(const SweepOutcome& sweep);
std::string hack_summary_csv(const std::vector<HackRow>& rows);
std::string hack_curve_csv(const std::vector<HackCurvePoint>& curve);
std::string predictors_csv(const std::vector<PredictorRow>& rows);

/// Formats a double with 17 significant digits (round-trip exact).
std::string fmt(double v);

}  // namespace ersft
