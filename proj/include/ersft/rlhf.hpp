#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ersft/bandit.hpp"
#include "ersft/policy.hpp"
#include "ersft/random.hpp"
#include "ersft/reward_model.hpp"

namespace ersft {

struct PpoConfig {
  double clip = 0.2;
  int group_size = 8;  // G samples per context
  int steps = 50;
  int inner_epochs = 4;  // gradient steps per sampled batch
  double learning_rate = 0.5;
  double kl_coef = 0.0;  // penalty on KL(pi || reference); off by default
  std::uint64_t seed = 0;

  void validate() const;
};

struct DpoConfig {
  double beta = 0.1;
  int pairs_per_context = 4;
  int steps = 50;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Actions sampled from the old policy with group-baselined RM advantages.
struct PpoBatch {
  struct Sample {
    std::size_t context = 0;  // index into the batch's contexts
    int action = 0;
    double advantage = 0.0;
    double old_prob = 0.0;
  };
  std::vector<Context> contexts;
  std::vector<Sample> samples;
};

PpoBatch sample_ppo_batch(const ParametricPolicy& old_policy, std::span<const Context> contexts,
                          const RewardModel& rm, int group_size, Rng& rng);

struct PpoStepStats {
  double loss = 0.0;  // -mean min(rho A, clip(rho) A)
  double unclipped_loss = 0.0;  // -mean rho A
  double clip_fraction = 0.0;
};

/// One gradient step on the clipped surrogate over a fixed batch.
/// `reference` is only read when kl_coef > 0.
PpoStepStats ppo_update(ParametricPolicy& policy, const PpoBatch& batch, const PpoConfig& config,
                        const ParametricPolicy* reference = nullptr);

/// Samples G actions per context from `old_policy`, scores them with the RM and
/// takes one gradient step on `policy`.
PpoStepStats ppo_step(ParametricPolicy& policy, const ParametricPolicy& old_policy,
                      std::span<const Context> contexts, const RewardModel& rm,
                      const PpoConfig& config, Rng& rng);

struct DpoStepStats {
  double loss = 0.0;  // mean over used pairs
  std::size_t pairs = 0;
  std::size_t skipped = 0;  // identical sampled actions
  std::size_t ties = 0;     // equal RM scores, lower action id wins
};

/// Samples pairs from the current policy, ranks them with the RM and takes one
/// gradient step on -log sigmoid(beta * margin) against `reference`.
DpoStepStats dpo_step(ParametricPolicy& policy, const ParametricPolicy& reference,
                      std::span<const Context> contexts, const RewardModel& rm,
                      const DpoConfig& config, Rng& rng);

/// -log sigmoid(beta * [(logp_w - ref_w) - (logp_l - ref_l)]) for one pair.
double dpo_pair_loss(const Vector& policy_logp, const Vector& reference_logp, int winner,
                     int loser, double beta);

using RlhfObserver = std::function<void(int step, const ParametricPolicy&)>;

/// `steps` outer iterations; each syncs old <- policy, samples once and runs
/// `inner_epochs` clipped updates. KL reference (if any) is the initial policy.
ParametricPolicy run_ppo(ParametricPolicy initial, std::span<const Context> contexts,
                         const RewardModel& rm, const PpoConfig& config,
                         const RlhfObserver& observer = {});
ParametricPolicy run_dpo(ParametricPolicy initial, std::span<const Context> contexts,
                         const RewardModel& rm, const DpoConfig& config,
                         const RlhfObserver& observer = {});

/// Mean RM score over n_generations actions sampled per context.
double avg_reward_score(const ParametricPolicy& policy, const RewardModel& rm,
                        std::span<const Context> contexts, int n_generations, std::uint64_t seed);
/// Exact expectation sum_s d(s) sum_a pi(a|s) rm(s, a) over context ids.
double expected_reward_score(const ParametricPolicy& policy, const RewardModel& rm,
                             const Vector& context_dist);

/// Evaluation contexts drawn i.i.d. from `context_dist` on the stream (seed, "eval_contexts").
std::vector<Context> sample_contexts(const Vector& context_dist, int n, std::uint64_t seed);

}  // namespace ersft
