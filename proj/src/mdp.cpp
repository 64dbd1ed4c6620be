#include "ersft/mdp.hpp"

#include <cmath>

#include "ersft/error.hpp"
#include "ersft/random.hpp"

namespace ersft {

ReturnStats return_stats(const OfflineDataset& ds) {
  if (!ds.trajectory_mode()) throw ParameterError("return statistics need a trajectory dataset");
  double sum = 0.0;
  for (const auto& tau : ds.trajectories) sum += tau.ret;
  const double n = static_cast<double>(ds.trajectories.size());
  const double mu = sum / n;
  double ss = 0.0;
  for (const auto& tau : ds.trajectories) ss += (tau.ret - mu) * (tau.ret - mu);
  return {mu, std::sqrt(ss / n)};
}

std::vector<double> trajectory_weights(const OfflineDataset& ds, double lambda, bool standardize) {
  if (!(lambda > 0.0)) throw ParameterError("lambda must be > 0");
  const ReturnStats stats = return_stats(ds);
  std::vector<double> w;
  w.reserve(ds.trajectories.size());
  for (std::size_t j = 0; j < ds.trajectories.size(); ++j) {
    double r = ds.trajectories[j].ret;
    if (standardize) r = stats.sigma_d > 0.0 ? (r - stats.mu) / stats.sigma_d : 0.0;
    const double v = std::exp(r / lambda);
    if (!std::isfinite(v)) {
      throw DivergenceError("weight overflow for trajectory " + std::to_string(j) + " (return " +
                            std::to_string(ds.trajectories[j].ret) + ")");
    }
    w.push_back(v);
  }
  return w;
}

double aggregate_sigma(std::span<const double> step_sigmas) {
  double ss = 0.0;
  for (double s : step_sigmas) {
    if (!(s >= 0.0)) throw ParameterError("step sigma must be >= 0");
    ss += s * s;
  }
  return std::sqrt(ss);
}

std::vector<TailPoint> sum_noise_tail(std::span<const NoiseModel> steps, int n_samples,
                                      std::span<const double> points, std::uint64_t seed) {
  if (n_samples < 1) throw ParameterError("n_samples must be >= 1");
  std::vector<double> sigmas;
  for (const auto& m : steps) {
    if (m.kind != NoiseModel::Kind::kGaussian && m.kind != NoiseModel::Kind::kBoundedUniform &&
        m.kind != NoiseModel::Kind::kNone) {
      throw ParameterError("tail check supports gaussian, bounded_uniform and none");
    }
    sigmas.push_back(m.kind == NoiseModel::Kind::kNone ? 0.0 : m.sigma);
  }
  const double sigma = aggregate_sigma(sigmas);
  Rng rng = make_stream(seed, "noise");
  std::vector<double> sums(static_cast<std::size_t>(n_samples));
  for (auto& total : sums) {
    total = 0.0;
    for (const auto& m : steps) total += m.observe(0.0, 1.0, rng);
  }
  std::vector<TailPoint> out;
  for (double t : points) {
    std::size_t hits = 0;
    for (double v : sums) hits += std::abs(v) >= t ? 1 : 0;
    TailPoint p;
    p.t = t;
    p.empirical = static_cast<double>(hits) / n_samples;
    p.bound = sigma > 0.0 ? std::min(1.0, 2.0 * std::exp(-t * t / (2.0 * sigma * sigma)))
                          : (t > 0.0 ? 0.0 : 1.0);
    out.push_back(p);
  }
  return out;
}

}  // namespace ersft
