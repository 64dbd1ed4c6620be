#include "ersft/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ersft/error.hpp"

namespace ersft {

void Catalog::validate() const {
  if (n_actions < 2) throw ParameterError("catalog needs at least 2 actions");
  if (n_contexts < 1) throw ParameterError("catalog needs at least 1 context");
}

void NoiseModel::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ParameterError("noise sigma must be >= 0");
  if (kind == Kind::kNone && sigma != 0.0) throw ParameterError("noise kind none requires sigma = 0");
  if (kind == Kind::kDiscreteRating && levels < 2) {
    throw ParameterError("discrete_rating noise needs at least 2 levels");
  }
}

double NoiseModel::observe(double true_reward, double r_max, Rng& rng) const {
  switch (kind) {
    case Kind::kNone:
      return true_reward;
    case Kind::kGaussian:
      return true_reward + rng.normal(0.0, sigma);
    case Kind::kBoundedUniform:
      return true_reward + rng.uniform(-sigma, sigma);
    case Kind::kDiscreteRating: {
      const double step = r_max / (levels - 1);
      const double raw = true_reward + rng.normal(0.0, sigma);
      const double snapped = std::round(raw / step) * step;
      return std::clamp(snapped, 0.0, r_max);
    }
  }
  return true_reward;
}

std::string NoiseModel::kind_name() const {
  switch (kind) {
    case Kind::kNone: return "none";
    case Kind::kGaussian: return "gaussian";
    case Kind::kBoundedUniform: return "bounded_uniform";
    case Kind::kDiscreteRating: return "discrete_rating";
  }
  return "none";
}

NoiseModel::Kind NoiseModel::parse_kind(const std::string& name) {
  if (name == "none") return Kind::kNone;
  if (name == "gaussian") return Kind::kGaussian;
  if (name == "bounded_uniform") return Kind::kBoundedUniform;
  if (name == "discrete_rating") return Kind::kDiscreteRating;
  throw ParameterError("unknown noise kind: " + name);
}

void SyntheticEnvironment::validate() const {
  catalog.validate();
  noise.validate();
  if (!(r_max > 0.0)) throw ParameterError("r_max must be positive");
  if (true_reward.rows() != catalog.n_contexts || true_reward.cols() != catalog.n_actions) {
    throw ParameterError("true_reward shape does not match catalog");
  }
  if ((true_reward.array() < 0.0).any() || (true_reward.array() > r_max).any()) {
    throw ParameterError("true rewards must lie in [0, r_max]");
  }
  if (context_dist.size() != catalog.n_contexts || (context_dist.array() < 0.0).any() ||
      std::abs(context_dist.sum() - 1.0) > kRowSumTolerance) {
    throw ParameterError("context distribution must be a probability vector over contexts");
  }
  if (logging_policy.n_contexts() != catalog.n_contexts ||
      logging_policy.n_actions() != catalog.n_actions) {
    throw ParameterError("logging policy shape does not match catalog");
  }
  if (!logging_policy.has_full_support()) {
    throw SupportError("logging policy must have full support");
  }
}

Context OfflineDataset::context_of(const LoggedInteraction& x) const {
  Context c{x.context, {}};
  if (x.position >= 0 && !sequences.empty()) {
    const auto& seq = sequences[static_cast<std::size_t>(x.context)];
    c.history = std::span<const int>(seq).first(static_cast<std::size_t>(x.position));
  }
  return c;
}

void OfflineDataset::refresh_context_dist() {
  empirical_context_dist = Vector::Zero(catalog.n_contexts);
  for (const auto& x : interactions) empirical_context_dist[x.context] += 1.0;
  if (!interactions.empty()) empirical_context_dist /= static_cast<double>(interactions.size());
}

void OfflineDataset::validate() const {
  catalog.validate();
  if (interactions.empty()) throw ParameterError("dataset is empty");
  for (const auto& x : interactions) {
    if (!catalog.contains(x.context, x.action)) throw ParameterError("interaction outside catalog");
  }
  // Only a fixed horizon is supported in trajectory mode.
  for (const auto& tau : trajectories) {
    if (tau.horizon() != trajectories.front().horizon() || tau.horizon() == 0) {
      throw ParameterError("trajectories must share one nonzero horizon");
    }
  }
}

SyntheticEnvironment make_low_rank_env(const LowRankEnvSpec& spec) {
  Catalog catalog{spec.n_contexts, spec.n_actions};
  catalog.validate();
  if (spec.rank < 1 || spec.rank > std::min(spec.n_contexts, spec.n_actions)) {
    throw ParameterError("rank must lie in [1, min(n_contexts, n_actions)]");
  }
  if (!(spec.r_max > 0.0)) throw ParameterError("r_max must be positive");
  if (!(spec.popularity_skew >= 0.0)) throw ParameterError("popularity_skew must be >= 0");
  spec.noise.validate();

  Rng rng = make_stream(spec.seed, "env");
  Matrix u(spec.n_contexts, spec.rank);
  Matrix v(spec.n_actions, spec.rank);
  for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.normal();
  Matrix raw = u * v.transpose();

  const double lo = raw.minCoeff();
  const double hi = raw.maxCoeff();
  Matrix reward(spec.n_contexts, spec.n_actions);
  if (hi - lo > 0.0) {
    reward = ((raw.array() - lo) / (hi - lo) * spec.r_max).matrix();
  } else {
    reward.setConstant(spec.r_max / 2.0);
  }
  reward = reward.cwiseMax(0.0).cwiseMin(spec.r_max);

  // Zipf-like popularity: a random rank per action, score = -skew * log(rank).
  std::vector<int> ranks(static_cast<std::size_t>(spec.n_actions));
  std::iota(ranks.begin(), ranks.end(), 1);
  rng.shuffle(ranks);
  Matrix logging(spec.n_contexts, spec.n_actions);
  for (int s = 0; s < spec.n_contexts; ++s) {
    Vector logits(spec.n_actions);
    for (int a = 0; a < spec.n_actions; ++a) {
      logits[a] = -spec.popularity_skew * std::log(static_cast<double>(ranks[a])) +
                  spec.reward_correlation * reward(s, a) / spec.r_max;
    }
    logging.row(s) = softmax(logits).transpose();
  }

  SyntheticEnvironment env;
  env.catalog = catalog;
  env.true_reward = std::move(reward);
  env.r_max = spec.r_max;
  env.context_dist = Vector::Constant(spec.n_contexts, 1.0 / spec.n_contexts);
  env.logging_policy = TabularPolicy(std::move(logging));
  env.noise = spec.noise;
  env.validate();
  return env;
}

SyntheticEnvironment make_low_rank_env(int n_contexts, int n_actions, int rank, double r_max,
                                       double popularity_skew, std::uint64_t seed,
                                       NoiseModel noise) {
  LowRankEnvSpec spec;
  spec.n_contexts = n_contexts;
  spec.n_actions = n_actions;
  spec.rank = rank;
  spec.r_max = r_max;
  spec.popularity_skew = popularity_skew;
  spec.noise = noise;
  spec.seed = seed;
  return make_low_rank_env(spec);
}

namespace {

LoggedInteraction draw_interaction(const SyntheticEnvironment& env, Rng& rng) {
  const auto& d0 = env.context_dist;
  const int s = static_cast<int>(rng.categorical(std::span<const double>(d0.data(), d0.size())));
  const auto& pi = env.logging_policy.probs();
  const int a = static_cast<int>(rng.categorical(
      std::span<const double>(pi.row(s).data(), static_cast<std::size_t>(pi.cols()))));
  const double r = env.noise.observe(env.true_reward(s, a), env.r_max, rng);
  return {s, a, r, -1};
}

}  // namespace

OfflineDataset sample_dataset(const SyntheticEnvironment& env, int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw ParameterError("n_samples must be >= 1");
  Rng rng = make_stream(seed, "data");
  OfflineDataset ds;
  ds.catalog = env.catalog;
  ds.interactions.reserve(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) ds.interactions.push_back(draw_interaction(env, rng));
  ds.refresh_context_dist();
  return ds;
}

OfflineDataset sample_trajectories(const SyntheticEnvironment& env, int n_trajectories,
                                   int horizon, std::uint64_t seed) {
  if (horizon < 1) throw ParameterError("trajectory horizon must be >= 1");
  if (n_trajectories < 1) throw ParameterError("n_trajectories must be >= 1");
  Rng rng = make_stream(seed, "data");
  OfflineDataset ds;
  ds.catalog = env.catalog;
  ds.trajectories.reserve(static_cast<std::size_t>(n_trajectories));
  for (int j = 0; j < n_trajectories; ++j) {
    Trajectory tau;
    for (int t = 0; t < horizon; ++t) {
      tau.steps.push_back(draw_interaction(env, rng));
      tau.ret += tau.steps.back().observed_reward;
    }
    ds.interactions.insert(ds.interactions.end(), tau.steps.begin(), tau.steps.end());
    ds.trajectories.push_back(std::move(tau));
  }
  ds.refresh_context_dist();
  return ds;
}

}  // namespace ersft
