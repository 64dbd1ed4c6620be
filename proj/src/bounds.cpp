#include "ersft/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

#include "ersft/error.hpp"
#include "ersft/linalg.hpp"
#include "ersft/random.hpp"
#include "ersft/tilt.hpp"

namespace ersft {

namespace {

void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("delta must be in (0, 1)");
}

void check_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ParameterError("lambda must be > 0");
}

// Runs body(i) for i in [0, n) on up to n_threads workers. Each index writes
// only its own slot, so results match the serial run.
void parallel_for(std::size_t n, int n_threads, const std::function<void(std::size_t)>& body) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, n_threads)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) body(i);
    });
  }
}

Vector row_of(const Matrix& m, int s) { return m.row(s).transpose(); }

}  // namespace

double epsilon_of(double sigma, int n_actions, double delta) {
  if (!(sigma >= 0.0)) throw ParameterError("sigma must be >= 0");
  if (n_actions < 1) throw ParameterError("n_actions must be >= 1");
  check_delta(delta);
  return sigma * std::sqrt(2.0 * std::log(2.0 * n_actions / delta));
}

double epsilon_uniform(double sigma, int n_states, int n_actions, double delta) {
  if (n_states < 1) throw ParameterError("n_states must be >= 1");
  if (n_actions < 1) throw ParameterError("n_actions must be >= 1");
  return epsilon_of(sigma, 1, delta / (static_cast<double>(n_states) * n_actions));
}

double value_slack(double epsilon, double lambda, double r_max) {
  check_lambda(lambda);
  return r_max * std::expm1(2.0 * epsilon / lambda);
}

double tv_bound(double epsilon, double lambda) {
  check_lambda(lambda);
  return std::expm1(2.0 * epsilon / lambda) / 2.0;
}

double linearized_slack(double epsilon, double lambda, double r_max) {
  check_lambda(lambda);
  return 4.0 * r_max * epsilon / lambda;
}

double min_safe_lambda_for_epsilon(double epsilon, double tau, double r_max) {
  if (!(epsilon >= 0.0)) throw ParameterError("epsilon must be >= 0");
  if (!(tau > 0.0)) throw ParameterError("tau must be > 0");
  if (!(r_max > 0.0)) throw ParameterError("r_max must be > 0");
  return 2.0 * epsilon / std::log1p(tau / r_max);
}

double min_safe_lambda(double sigma, int n_actions, double delta, double tau, double r_max) {
  return min_safe_lambda_for_epsilon(epsilon_of(sigma, n_actions, delta), tau, r_max);
}

double binomial_upper_limit(std::size_t k, std::size_t n, double alpha) {
  if (n == 0) throw ParameterError("binomial_upper_limit: n must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must be in (0, 1)");
  if (k >= n) return 1.0;
  const double nd = static_cast<double>(n);
  auto cdf = [&](double p) {
    const double lp = std::log(p);
    const double lq = std::log1p(-p);
    double total = 0.0;
    for (std::size_t j = 0; j <= k; ++j) {
      const double jd = static_cast<double>(j);
      total += std::exp(std::lgamma(nd + 1) - std::lgamma(jd + 1) - std::lgamma(nd - jd + 1) +
                        jd * lp + (nd - jd) * lq);
    }
    return total;
  };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) > alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

RealizedStats RealizedStats::of(const std::vector<double>& values) {
  RealizedStats r;
  if (values.empty()) return r;
  r.min = r.max = values.front();
  double sum = 0.0;
  for (double v : values) {
    r.min = std::min(r.min, v);
    r.max = std::max(r.max, v);
    sum += v;
  }
  r.mean = sum / static_cast<double>(values.size());
  return r;
}

nlohmann::json RealizedStats::to_json() const { return {{"min", min}, {"max", max}, {"mean", mean}}; }

nlohmann::json BoundReport::to_json() const {
  nlohmann::json j;
  j["check"] = check;
  j["params"] = params;
  if (lambda > 0.0) j["lambda"] = lambda;
  j["epsilon"] = epsilon;
  j["claimed"] = claimed;
  j["realized"] = realized.to_json();
  j["violations"] = violations;
  j["n_trials"] = n_trials;
  j["n_checks"] = n_checks;
  j["passed"] = passed;
  if (!extra.is_null()) j["details"] = extra;
  return j;
}

SyntheticEnvironment random_bandit_env(int n_contexts, int n_actions, double r_max,
                                       std::uint64_t seed, NoiseModel noise) {
  if (n_contexts < 1 || n_actions < 1) throw ParameterError("environment sizes must be >= 1");
  if (!(r_max > 0.0)) throw ParameterError("r_max must be > 0");
  Rng rng = make_stream(seed, "env");
  SyntheticEnvironment env;
  env.catalog = {n_contexts, n_actions};
  env.r_max = r_max;
  env.true_reward.resize(n_contexts, n_actions);
  for (Eigen::Index i = 0; i < env.true_reward.size(); ++i) {
    env.true_reward.data()[i] = rng.uniform(0.0, r_max);
  }
  Matrix logging(n_contexts, n_actions);
  for (int s = 0; s < n_contexts; ++s) {
    Vector logits(n_actions);
    for (int a = 0; a < n_actions; ++a) logits[a] = rng.normal();
    logging.row(s) = softmax(logits).transpose();
  }
  env.logging_policy = TabularPolicy(std::move(logging));
  env.context_dist = Vector::Constant(n_contexts, 1.0 / n_contexts);
  env.noise = noise;
  env.validate();
  return env;
}

SyntheticEnvironment prop1_instance(const Prop1Config& config, int index) {
  Rng rng = make_stream(config.seed, "prop1", static_cast<std::uint64_t>(index));
  const int n_s = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(config.max_contexts)));
  const int n_a = 2 + static_cast<int>(rng.index(static_cast<std::size_t>(config.max_actions - 1)));
  // Reward scales and logging sharpness vary over several orders of magnitude.
  const double r_max = std::exp(rng.uniform(-3.0, 3.0));
  const double sharpness = std::exp(rng.uniform(-2.0, 1.5));
  SyntheticEnvironment env;
  env.catalog = {n_s, n_a};
  env.r_max = r_max;
  env.true_reward.resize(n_s, n_a);
  for (Eigen::Index i = 0; i < env.true_reward.size(); ++i) {
    env.true_reward.data()[i] = rng.uniform(0.0, r_max);
  }
  Matrix logging(n_s, n_a);
  for (int s = 0; s < n_s; ++s) {
    Vector logits(n_a);
    for (int a = 0; a < n_a; ++a) logits[a] = sharpness * rng.normal();
    logging.row(s) = softmax(logits).transpose();
  }
  env.logging_policy = TabularPolicy(std::move(logging));
  env.context_dist = Vector::Constant(n_s, 1.0 / n_s);
  env.validate();
  return env;
}

BoundReport check_prop1(const Prop1Config& config) {
  if (config.n_instances < 1) throw ParameterError("n_instances must be >= 1");
  if (config.max_contexts < 1 || config.max_actions < 2) {
    throw ParameterError("prop1 needs max_contexts >= 1 and max_actions >= 2");
  }
  for (double l : config.lambda_grid) check_lambda(l);
  BoundReport report;
  report.check = "prop1";
  report.params = {{"n_instances", config.n_instances},
                   {"max_contexts", config.max_contexts},
                   {"max_actions", config.max_actions},
                   {"lambda_grid", config.lambda_grid},
                   {"tolerance", config.tolerance},
                   {"seed", config.seed}};
  std::vector<double> gaps;
  for (int i = 0; i < config.n_instances; ++i) {
    const SyntheticEnvironment env = prop1_instance(config, i);
    const PolicyValue base = policy_value(env, env.logging_policy);
    for (double lambda : config.lambda_grid) {
      const TabularPolicy tilted = exp_tilt(env.logging_policy, env.true_reward, lambda).policy;
      const PolicyValue v = policy_value(env, tilted);
      for (int s = 0; s < env.catalog.n_contexts; ++s) {
        const double gap = v.per_context[s] - base.per_context[s];
        gaps.push_back(gap);
        if (gap < -config.tolerance) ++report.violations;
      }
    }
  }
  report.n_trials = static_cast<std::size_t>(config.n_instances);
  report.n_checks = gaps.size();
  report.realized = RealizedStats::of(gaps);
  report.passed = report.violations == 0;
  return report;
}

BoundReport check_thm1(const SyntheticEnvironment& env, const Thm1Config& config) {
  env.validate();
  check_lambda(config.lambda);
  if (!(config.sigma > 0.0)) throw ParameterError("bound check needs sigma > 0");
  if (config.n_trials < 1) throw ParameterError("n_trials must be >= 1");
  if (!(config.confidence > 0.0 && config.confidence < 1.0)) {
    throw ParameterError("confidence must be in (0, 1)");
  }
  const int n_s = env.catalog.n_contexts;
  const int n_a = env.catalog.n_actions;
  const double eps = config.uniform_over_states
                         ? epsilon_uniform(config.sigma, n_s, n_a, config.delta)
                         : epsilon_of(config.sigma, n_a, config.delta);
  const double claimed = 2.0 * eps;

  std::vector<Vector> base_rows, reward_rows;
  std::vector<double> base_values;
  std::vector<int> best_action;
  for (int s = 0; s < n_s; ++s) {
    base_rows.push_back(env.logging_policy.row(s));
    reward_rows.push_back(row_of(env.true_reward, s));
    base_values.push_back(row_value(base_rows.back(), reward_rows.back()));
    Eigen::Index best = 0;
    reward_rows.back().maxCoeff(&best);
    best_action.push_back(static_cast<int>(best));
  }

  const auto n_checks = static_cast<std::size_t>(config.n_trials) * static_cast<std::size_t>(n_s);
  std::vector<double> gaps(n_checks);
  std::vector<char> violated(n_checks, 0), outside_event(n_checks, 0);
  parallel_for(static_cast<std::size_t>(config.n_trials), config.n_threads, [&](std::size_t t) {
    Rng rng = make_stream(config.seed, "thm1", t);
    Vector noise(n_a);
    for (int s = 0; s < n_s; ++s) {
      for (int a = 0; a < n_a; ++a) noise[a] = rng.normal(0.0, config.sigma);
      if (config.inject) noise[best_action[static_cast<std::size_t>(s)]] = -*config.inject * eps;
      const std::size_t k = t * static_cast<std::size_t>(n_s) + static_cast<std::size_t>(s);
      const auto su = static_cast<std::size_t>(s);
      const Vector pi = exp_tilt_row(base_rows[su], reward_rows[su] + noise, config.lambda);
      gaps[k] = row_value(pi, reward_rows[su]) - base_values[su];
      violated[k] = gaps[k] < -claimed;
      outside_event[k] = noise.cwiseAbs().maxCoeff() > eps;
    }
  });

  BoundReport report;
  report.check = "thm1";
  report.lambda = config.lambda;
  report.epsilon = eps;
  report.claimed = claimed;
  report.n_trials = static_cast<std::size_t>(config.n_trials);
  report.n_checks = n_checks;
  report.realized = RealizedStats::of(gaps);
  std::size_t failures = 0;
  for (std::size_t k = 0; k < n_checks; ++k) {
    report.violations += static_cast<std::size_t>(violated[k]);
    failures += static_cast<std::size_t>(outside_event[k]);
  }
  const double upper = binomial_upper_limit(report.violations, n_checks, 1.0 - config.confidence);
  report.params = {{"lambda", config.lambda},       {"sigma", config.sigma},
                   {"delta", config.delta},         {"n_actions", n_a},
                   {"n_contexts", n_s},             {"r_max", env.r_max},
                   {"confidence", config.confidence},
                   {"uniform_over_states", config.uniform_over_states},
                   {"seed", config.seed}};
  if (config.inject) report.params["inject"] = *config.inject;
  report.extra = {{"violation_rate", static_cast<double>(report.violations) / static_cast<double>(n_checks)},
                  {"rate_upper_limit", upper},
                  {"conditioning_failures", failures}};
  report.passed = upper <= config.delta;
  return report;
}

BoundReport check_thm2(const SyntheticEnvironment& env, const Thm2Config& config) {
  env.validate();
  check_lambda(config.lambda);
  if (!env.noise.is_bounded()) {
    throw ParameterError("sure bounds need bounded noise, got " + env.noise.kind_name());
  }
  if (config.n_trials < 1) throw ParameterError("n_trials must be >= 1");
  const int n_s = env.catalog.n_contexts;
  const int n_a = env.catalog.n_actions;
  const double eps = env.noise.kind == NoiseModel::Kind::kNone ? 0.0 : env.noise.sigma;
  const double lambda = config.lambda;
  const double tol = config.tolerance;
  const double slack = value_slack(eps, lambda, env.r_max);
  const double tvb = tv_bound(eps, lambda);
  const bool linear_applies = lambda >= 2.0 * eps;
  const double lin = linearized_slack(eps, lambda, env.r_max);
  const double ratio_lo = std::exp(-eps / lambda);
  const double ratio_hi = std::exp(eps / lambda);

  struct Clean {
    Vector base, reward, tilt;
    double log_z = 0.0;
    double base_value = 0.0;
  };
  std::vector<Clean> clean(static_cast<std::size_t>(n_s));
  for (int s = 0; s < n_s; ++s) {
    auto& c = clean[static_cast<std::size_t>(s)];
    c.base = env.logging_policy.row(s);
    c.reward = row_of(env.true_reward, s);
    c.tilt = exp_tilt_row(c.base, c.reward, lambda, &c.log_z);
    c.base_value = row_value(c.base, c.reward);
  }

  const auto n_checks = static_cast<std::size_t>(config.n_trials) * static_cast<std::size_t>(n_s);
  std::vector<double> gaps(n_checks), tvs(n_checks), ratios(n_checks), identity_err(n_checks);
  parallel_for(static_cast<std::size_t>(config.n_trials), config.n_threads, [&](std::size_t t) {
    Rng rng = make_stream(config.seed, "thm2", t);
    Vector noise(n_a);
    for (int s = 0; s < n_s; ++s) {
      const auto& c = clean[static_cast<std::size_t>(s)];
      for (int a = 0; a < n_a; ++a) {
        noise[a] = env.noise.observe(c.reward[a], env.r_max, rng) - c.reward[a];
      }
      double log_z = 0.0;
      const Vector pi = exp_tilt_row(c.base, c.reward + noise, lambda, &log_z);
      const std::size_t k = t * static_cast<std::size_t>(n_s) + static_cast<std::size_t>(s);
      gaps[k] = row_value(pi, c.reward) - c.base_value;
      tvs[k] = tv_distance(c.tilt, pi);
      ratios[k] = std::exp(log_z - c.log_z);
      identity_err[k] = std::abs(ratios[k] - expected_noise_weight(c.tilt, noise, lambda)) / ratios[k];
    }
  });

  std::size_t v_tv = 0, v_value = 0, v_linear = 0, v_ratio = 0, v_identity = 0;
  for (std::size_t k = 0; k < n_checks; ++k) {
    if (tvs[k] > tvb + tol) ++v_tv;
    if (gaps[k] < -slack - tol) ++v_value;
    if (linear_applies && gaps[k] < -lin - tol) ++v_linear;
    if (ratios[k] < ratio_lo * (1.0 - tol) || ratios[k] > ratio_hi * (1.0 + tol)) ++v_ratio;
    if (identity_err[k] > 1e-10) ++v_identity;
  }

  BoundReport report;
  report.check = "thm2";
  report.lambda = lambda;
  report.epsilon = eps;
  report.claimed = slack;
  report.n_trials = static_cast<std::size_t>(config.n_trials);
  report.n_checks = n_checks;
  report.realized = RealizedStats::of(gaps);
  report.violations = v_tv + v_value + v_linear + v_ratio + v_identity;
  report.params = {{"lambda", lambda},       {"epsilon_b", eps},   {"n_actions", n_a},
                   {"n_contexts", n_s},      {"r_max", env.r_max}, {"tolerance", tol},
                   {"seed", config.seed}};
  const RealizedStats ratio_stats = RealizedStats::of(ratios);
  report.extra = {
      {"tv_bound", tvb},
      {"tv", RealizedStats::of(tvs).to_json()},
      {"per_trial_tv", tvs},
      {"linearized_slack", linear_applies ? nlohmann::json(lin) : nlohmann::json(nullptr)},
      {"partition_ratio", {{"min", ratio_stats.min}, {"max", ratio_stats.max},
                           {"bracket", {ratio_lo, ratio_hi}}}},
      {"violations_by_check", {{"tv", v_tv}, {"value", v_value}, {"linearized", v_linear},
                               {"partition_ratio", v_ratio}, {"ratio_identity", v_identity}}}};
  report.passed = report.violations == 0;
  return report;
}

}  // namespace ersft
