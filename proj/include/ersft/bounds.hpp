#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ersft/bandit.hpp"
#include "json.hpp"

namespace ersft {

/// sigma * sqrt(2 ln(2 |A| / delta)).
double epsilon_of(double sigma, int n_actions, double delta);
/// Union bound over states: sigma * sqrt(2 ln(2 |S| |A| / delta)).
double epsilon_uniform(double sigma, int n_states, int n_actions, double delta);

/// R_max (e^{2 eps / lambda} - 1).
double value_slack(double epsilon, double lambda, double r_max);
/// (e^{2 eps / lambda} - 1) / 2.
double tv_bound(double epsilon, double lambda);
/// 4 R_max eps / lambda; only claimed when lambda >= 2 eps.
double linearized_slack(double epsilon, double lambda, double r_max);

/// Smallest lambda whose value slack is at most tau: 2 eps / ln(1 + tau / R_max).
double min_safe_lambda(double sigma, int n_actions, double delta, double tau, double r_max);
double min_safe_lambda_for_epsilon(double epsilon, double tau, double r_max);

/// Smallest p with P(Binomial(n, p) <= k) <= alpha: the one-sided upper
/// confidence limit for a rate after k events in n trials.
double binomial_upper_limit(std::size_t k, std::size_t n, double alpha);

struct RealizedStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;

  /// Reduction in index order, so the result does not depend on how the
  /// values were produced.
  static RealizedStats of(const std::vector<double>& values);
  nlohmann::json to_json() const;
};

struct BoundReport {
  std::string check;  // prop1, thm1 or thm2
  double lambda = 0.0;
  double epsilon = 0.0;
  double claimed = 0.0;  // claimed value gap (a lower bound on V^pi - V^beta is -claimed)
  RealizedStats realized;  // V^pi(s) - V^beta(s) per checked state
  std::size_t violations = 0;
  std::size_t n_trials = 0;
  std::size_t n_checks = 0;  // trials x states (x lambdas for prop1)
  nlohmann::json params;
  nlohmann::json extra;  // check-specific claims and realizations
  bool passed = false;

  nlohmann::json to_json() const;
};

struct Prop1Config {
  int n_instances = 1000;
  int max_contexts = 20;
  int max_actions = 50;
  std::vector<double> lambda_grid{0.1, 1.0, 10.0};
  double tolerance = 1e-12;
  std::uint64_t seed = 0;
};

/// Random clean tabular instance i of the exact improvement check.
SyntheticEnvironment prop1_instance(const Prop1Config& config, int index);

/// Exact check of V^{tilt}(s) >= V^beta(s) - tolerance on random instances.
BoundReport check_prop1(const Prop1Config& config);

struct Thm1Config {
  double lambda = 1.0;
  double sigma = 1.0;
  double delta = 0.05;
  int n_trials = 10000;
  double confidence = 0.99;
  bool uniform_over_states = false;
  // When set, every trial overrides the noise at each state's best action
  // with -inject * eps, forcing the conditioning event to fail when inject > 1.
  std::optional<double> inject;
  std::uint64_t seed = 0;
  int n_threads = 1;
};

/// Gaussian noise N(0, sigma^2) on every action; violation iff
/// V^{pi_lambda}(s) < V^beta(s) - 2 eps. Passes iff the upper confidence
/// limit of the violation rate is at most delta.
BoundReport check_thm1(const SyntheticEnvironment& env, const Thm1Config& config);

struct Thm2Config {
  double lambda = 1.0;
  int n_trials = 1000;
  double tolerance = 1e-12;
  std::uint64_t seed = 0;
  int n_threads = 1;
};

/// Sure bounds under the environment's bounded noise (eps = noise bound):
/// TV, value slack, linearized slack (lambda >= 2 eps) and the partition
/// ratio bracket. Throws ParameterError for unbounded noise.
BoundReport check_thm2(const SyntheticEnvironment& env, const Thm2Config& config);

/// Environment with uniform [0, r_max] rewards and a random
/// full-support logging policy; used by the bound checks.
SyntheticEnvironment random_bandit_env(int n_contexts, int n_actions, double r_max,
                                       std::uint64_t seed, NoiseModel noise = NoiseModel::none());

}  // namespace ersft
