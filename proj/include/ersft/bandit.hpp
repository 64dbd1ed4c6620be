#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ersft/linalg.hpp"
#include "ersft/random.hpp"
#include "ersft/tabular_policy.hpp"

namespace ersft {

struct Catalog {
  int n_contexts = 1;
  int n_actions = 2;

  void validate() const;
  bool contains(int s, int a) const {
    return s >= 0 && s < n_contexts && a >= 0 && a < n_actions;
  }
};

/// Observation noise added to true rewards. `sigma` is the sub-Gaussian
/// parameter: for bounded_uniform it equals the bound, for discrete_rating
/// it is the pre-rounding Gaussian scale.
struct NoiseModel {
  enum class Kind { kNone, kGaussian, kBoundedUniform, kDiscreteRating };

  Kind kind = Kind::kNone;
  double sigma = 0.0;
  int levels = 0;

  static NoiseModel none() { return {}; }
  static NoiseModel gaussian(double sigma) { return {Kind::kGaussian, sigma, 0}; }
  static NoiseModel bounded_uniform(double bound) { return {Kind::kBoundedUniform, bound, 0}; }
  static NoiseModel discrete_rating(int levels, double sigma) {
    return {Kind::kDiscreteRating, sigma, levels};
  }

  void validate() const;
  /// Noisy observation of `true_reward`. Draws nothing when kind is none.
  double observe(double true_reward, double r_max, Rng& rng) const;
  /// |xi| <= sigma surely.
  bool is_bounded() const { return kind == Kind::kNone || kind == Kind::kBoundedUniform; }
  std::string kind_name() const;
  static Kind parse_kind(const std::string& name);
};

struct SyntheticEnvironment {
  Catalog catalog;
  Matrix true_reward;  // r*(s, a) in [0, r_max]
  double r_max = 1.0;
  Vector context_dist;  // d0
  TabularPolicy logging_policy;
  NoiseModel noise;

  void validate() const;
};

/// View of a context: a tabular id, optionally with the item history that
/// precedes the interaction (sequence mode).
struct Context {
  int id = 0;
  std::span<const int> history{};
};

struct LoggedInteraction {
  int context = 0;
  int action = 0;
  double observed_reward = 0.0;
  // Index into the context's item sequence (sequence mode); -1 otherwise.
  int position = -1;
};

struct Trajectory {
  std::vector<LoggedInteraction> steps;
  double ret = 0.0;  // R(tau), the sum of step rewards

  int horizon() const { return static_cast<int>(steps.size()); }
};

struct OfflineDataset {
  Catalog catalog;
  std::vector<LoggedInteraction> interactions;
  Vector empirical_context_dist;
  // Trajectory mode only; `interactions` then holds the flattened steps.
  std::vector<Trajectory> trajectories;
  // Sequence mode only: per-context ordered item ids.
  std::vector<std::vector<int>> sequences;

  bool trajectory_mode() const { return !trajectories.empty(); }
  bool sequence_mode() const { return !sequences.empty(); }
  std::size_t size() const { return interactions.size(); }
  Context context_of(const LoggedInteraction& x) const;

  /// Recomputes `empirical_context_dist` from the interactions.
  void refresh_context_dist();
  void validate() const;
};

struct LowRankEnvSpec {
  int n_contexts = 20;
  int n_actions = 50;
  int rank = 3;
  double r_max = 1.0;
  double popularity_skew = 1.0;
  // Coefficient on r*/r_max in the logging logits.
  double reward_correlation = 1.0;
  NoiseModel noise;
  std::uint64_t seed = 0;
};

SyntheticEnvironment make_low_rank_env(const LowRankEnvSpec& spec);
SyntheticEnvironment make_low_rank_env(int n_contexts, int n_actions, int rank, double r_max,
                                       double popularity_skew, std::uint64_t seed,
                                       NoiseModel noise = NoiseModel::none());

OfflineDataset sample_dataset(const SyntheticEnvironment& env, int n_samples, std::uint64_t seed);

/// Stateless transitions: contexts are drawn i.i.d. from d0 at every step.
/// With horizon 1 the draws coincide with sample_dataset on the same seed.
OfflineDataset sample_trajectories(const SyntheticEnvironment& env, int n_trajectories,
                                   int horizon, std::uint64_t seed);

}  // namespace ersft
