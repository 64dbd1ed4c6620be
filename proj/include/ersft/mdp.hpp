#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ersft/bandit.hpp"

namespace ersft {

/// Mean and population standard deviation of the trajectory returns.
struct ReturnStats {
  double mu = 0.0;
  double sigma_d = 0.0;
};

ReturnStats return_stats(const OfflineDataset& ds);

/// w = exp(R~/lambda) with R~ = (R - mu) / sigma_d when standardizing (all
/// zero when sigma_d = 0). Throws DivergenceError naming the trajectory on overflow.
std::vector<double> trajectory_weights(const OfflineDataset& ds, double lambda, bool standardize);

/// sqrt(sum sigma_t^2): the sub-Gaussian parameter of a sum of independent
/// per-step noises.
double aggregate_sigma(std::span<const double> step_sigmas);

struct TailPoint {
  double t = 0.0;
  double empirical = 0.0;  // P(|sum| >= t) over the simulated sums
  double bound = 0.0;      // 2 exp(-t^2 / (2 sigma^2))
};

/// Simulates sums of independent per-step noises and compares their
/// two-sided tail with the sub-Gaussian bound at the aggregate parameter.
/// Each step's sigma is its sub-Gaussian parameter (the bound for bounded_uniform).
std::vector<TailPoint> sum_noise_tail(std::span<const NoiseModel> steps, int n_samples,
                                      std::span<const double> points, std::uint64_t seed);

}  // namespace ersft
