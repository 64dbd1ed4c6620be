#include "ersft/rlhf.hpp"

#include <algorithm>
#include <cmath>

#include "ersft/error.hpp"
#include "ersft/linalg.hpp"

namespace ersft {

void PpoConfig::validate() const {
  if (!(clip > 0.0 && clip < 1.0)) throw ParameterError("ppo clip must be in (0, 1)");
  if (group_size < 2) throw ParameterError("ppo group_size must be >= 2");
  if (steps < 0 || inner_epochs < 1) throw ParameterError("ppo steps/inner_epochs out of range");
  if (!(learning_rate > 0.0)) throw ParameterError("ppo learning_rate must be > 0");
  if (kl_coef < 0.0) throw ParameterError("ppo kl_coef must be >= 0");
}

void DpoConfig::validate() const {
  if (!(beta > 0.0)) throw ParameterError("dpo beta must be > 0");
  if (pairs_per_context < 1) throw ParameterError("dpo pairs_per_context must be >= 1");
  if (steps < 0) throw ParameterError("dpo steps must be >= 0");
  if (!(learning_rate > 0.0)) throw ParameterError("dpo learning_rate must be > 0");
}

namespace {

int sample_action(const Vector& probs, Rng& rng) {
  return static_cast<int>(
      rng.categorical(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size()))));
}

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

void check_finite(const ModelGradient& g, const char* what) {
  if (!g.item_embeddings.allFinite() || !g.item_bias.allFinite() || !g.context_table.allFinite()) {
    throw DivergenceError(std::string(what) + ": non-finite gradient");
  }
}

}  // namespace

PpoBatch sample_ppo_batch(const ParametricPolicy& old_policy, std::span<const Context> contexts,
                          const RewardModel& rm, int group_size, Rng& rng) {
  if (group_size < 2) throw ParameterError("ppo group_size must be >= 2");
  PpoBatch batch;
  batch.contexts.assign(contexts.begin(), contexts.end());
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    const Vector probs = old_policy.probs(contexts[i]);
    const Vector scores = rm.predict_all(contexts[i]);
    const std::size_t first = batch.samples.size();
    double mean = 0.0;
    for (int g = 0; g < group_size; ++g) {
      const int a = sample_action(probs, rng);
      batch.samples.push_back({i, a, scores[a], probs[a]});
      mean += scores[a];
    }
    mean /= group_size;
    for (std::size_t k = first; k < batch.samples.size(); ++k) batch.samples[k].advantage -= mean;
  }
  return batch;
}

PpoStepStats ppo_update(ParametricPolicy& policy, const PpoBatch& batch, const PpoConfig& config,
                        const ParametricPolicy* reference) {
  config.validate();
  if (config.kl_coef > 0.0 && reference == nullptr) {
    throw ParameterError("ppo kl_coef > 0 needs a reference policy");
  }
  PpoStepStats stats;
  if (batch.samples.empty()) return stats;
  const auto& model = policy.model();
  ModelGradient g = model.zero_gradient();
  const double inv_n = 1.0 / static_cast<double>(batch.samples.size());
  const double inv_c = 1.0 / static_cast<double>(batch.contexts.size());
  std::size_t clipped = 0;

  std::vector<std::vector<std::size_t>> by_context(batch.contexts.size());
  for (std::size_t k = 0; k < batch.samples.size(); ++k) {
    by_context[batch.samples[k].context].push_back(k);
  }
  for (std::size_t i = 0; i < batch.contexts.size(); ++i) {
    const Context& c = batch.contexts[i];
    const Vector x = model.encode(c);
    const Vector logp = log_softmax(model.scores_from_features(x));
    const Vector pi = logp.array().exp();
    Vector grad = Vector::Zero(pi.size());
    for (std::size_t k : by_context[i]) {
      const auto& smp = batch.samples[k];
      const double rho = pi[smp.action] / smp.old_prob;
      const double unclipped = rho * smp.advantage;
      const double clipped_term = std::clamp(rho, 1.0 - config.clip, 1.0 + config.clip) * smp.advantage;
      stats.unclipped_loss -= unclipped * inv_n;
      stats.loss -= std::min(unclipped, clipped_term) * inv_n;
      if (unclipped <= clipped_term) {
        // d(rho A)/d logits = rho A (onehot(a) - pi); the loss is its negative mean.
        const double coef = -rho * smp.advantage * inv_n;
        grad -= coef * pi;
        grad[smp.action] += coef;
      } else {
        ++clipped;
      }
    }
    if (config.kl_coef > 0.0) {
      const Vector ref_logp = reference->log_probs(c);
      const Vector diff = logp - ref_logp;
      const double kl = pi.dot(diff);
      stats.loss += config.kl_coef * kl * inv_c;
      grad += (config.kl_coef * inv_c) * (pi.array() * (diff.array() - kl)).matrix();
    }
    model.accumulate(c, x, grad, g);
  }
  stats.clip_fraction = static_cast<double>(clipped) * inv_n;
  check_finite(g, "ppo");
  policy.model().apply(g, config.learning_rate);
  return stats;
}

PpoStepStats ppo_step(ParametricPolicy& policy, const ParametricPolicy& old_policy,
                      std::span<const Context> contexts, const RewardModel& rm,
                      const PpoConfig& config, Rng& rng) {
  config.validate();
  const PpoBatch batch = sample_ppo_batch(old_policy, contexts, rm, config.group_size, rng);
  return ppo_update(policy, batch, config);
}

double dpo_pair_loss(const Vector& policy_logp, const Vector& reference_logp, int winner,
                     int loser, double beta) {
  const double margin = (policy_logp[winner] - reference_logp[winner]) -
                        (policy_logp[loser] - reference_logp[loser]);
  return -log_sigmoid(beta * margin);
}

DpoStepStats dpo_step(ParametricPolicy& policy, const ParametricPolicy& reference,
                      std::span<const Context> contexts, const RewardModel& rm,
                      const DpoConfig& config, Rng& rng) {
  config.validate();
  const auto& model = policy.model();
  DpoStepStats stats;

  struct Pair {
    int winner;
    int loser;
  };
  std::vector<std::vector<Pair>> pairs(contexts.size());
  std::vector<Vector> logps(contexts.size());
  std::vector<Vector> features(contexts.size());
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    features[i] = model.encode(contexts[i]);
    logps[i] = log_softmax(model.scores_from_features(features[i]));
    const Vector probs = logps[i].array().exp();
    const Vector scores = rm.predict_all(contexts[i]);
    for (int p = 0; p < config.pairs_per_context; ++p) {
      const int a = sample_action(probs, rng);
      const int b = sample_action(probs, rng);
      if (a == b) {
        ++stats.skipped;
        continue;
      }
      if (scores[a] == scores[b]) ++stats.ties;
      const bool a_wins = scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
      pairs[i].push_back(a_wins ? Pair{a, b} : Pair{b, a});
      ++stats.pairs;
    }
  }
  if (stats.pairs == 0) return stats;

  ModelGradient g = model.zero_gradient();
  const double inv_n = 1.0 / static_cast<double>(stats.pairs);
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    if (pairs[i].empty()) continue;
    const Vector ref_logp = reference.log_probs(contexts[i]);
    Vector grad = Vector::Zero(logps[i].size());
    for (const auto& [w, l] : pairs[i]) {
      const double margin = (logps[i][w] - ref_logp[w]) - (logps[i][l] - ref_logp[l]);
      stats.loss -= log_sigmoid(config.beta * margin) * inv_n;
      // The log-partition cancels in the margin: d margin / d logits = e_w - e_l.
      const double coef = -config.beta * sigmoid(-config.beta * margin) * inv_n;
      grad[w] += coef;
      grad[l] -= coef;
    }
    model.accumulate(contexts[i], features[i], grad, g);
  }
  check_finite(g, "dpo");
  policy.model().apply(g, config.learning_rate);
  return stats;
}

ParametricPolicy run_ppo(ParametricPolicy initial, std::span<const Context> contexts,
                         const RewardModel& rm, const PpoConfig& config,
                         const RlhfObserver& observer) {
  config.validate();
  const ParametricPolicy reference = initial;
  ParametricPolicy policy = std::move(initial);
  for (int step = 1; step <= config.steps; ++step) {
    Rng rng = make_stream(config.seed, "ppo", static_cast<std::uint64_t>(step));
    const ParametricPolicy old_policy = policy;
    const PpoBatch batch = sample_ppo_batch(old_policy, contexts, rm, config.group_size, rng);
    for (int k = 0; k < config.inner_epochs; ++k) ppo_update(policy, batch, config, &reference);
    if (observer) observer(step, policy);
  }
  return policy;
}

ParametricPolicy run_dpo(ParametricPolicy initial, std::span<const Context> contexts,
                         const RewardModel& rm, const DpoConfig& config,
                         const RlhfObserver& observer) {
  config.validate();
  const ParametricPolicy reference = initial;
  ParametricPolicy policy = std::move(initial);
  for (int step = 1; step <= config.steps; ++step) {
    Rng rng = make_stream(config.seed, "dpo", static_cast<std::uint64_t>(step));
    dpo_step(policy, reference, contexts, rm, config, rng);
    if (observer) observer(step, policy);
  }
  return policy;
}

double avg_reward_score(const ParametricPolicy& policy, const RewardModel& rm,
                        std::span<const Context> contexts, int n_generations, std::uint64_t seed) {
  if (n_generations < 1) throw ParameterError("n_generations must be >= 1");
  if (contexts.empty()) throw ParameterError("avg_reward_score needs contexts");
  Rng rng = make_stream(seed, "generations");
  double total = 0.0;
  for (const auto& c : contexts) {
    const Vector probs = policy.probs(c);
    const Vector scores = rm.predict_all(c);
    for (int g = 0; g < n_generations; ++g) total += scores[sample_action(probs, rng)];
  }
  return total / (static_cast<double>(contexts.size()) * n_generations);
}

double expected_reward_score(const ParametricPolicy& policy, const RewardModel& rm,
                             const Vector& context_dist) {
  double total = 0.0;
  for (Eigen::Index s = 0; s < context_dist.size(); ++s) {
    if (context_dist[s] == 0.0) continue;
    const Context c{static_cast<int>(s), {}};
    total += context_dist[s] * policy.probs(c).dot(rm.predict_all(c));
  }
  return total;
}

std::vector<Context> sample_contexts(const Vector& context_dist, int n, std::uint64_t seed) {
  if (n < 0) throw ParameterError("number of contexts must be >= 0");
  Rng rng = make_stream(seed, "eval_contexts");
  std::vector<Context> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(Context{sample_action(context_dist, rng), {}});
  return out;
}

}  // namespace ersft
