#include "ersft/train.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "ersft/error.hpp"
#include "ersft/tilt.hpp"

namespace ersft {

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kBc: return "bc";
    case Algorithm::kRsft: return "rsft";
    case Algorithm::kExpRsft: return "exp_rsft";
  }
  return "bc";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "bc") return Algorithm::kBc;
  if (name == "rsft") return Algorithm::kRsft;
  if (name == "exp_rsft" || name == "exp-rsft") return Algorithm::kExpRsft;
  throw ParameterError("unknown training algorithm: " + name);
}

void TrainConfig::validate() const {
  if (algorithm == Algorithm::kExpRsft) {
    if (!lambda || !(*lambda > 0.0) || !std::isfinite(*lambda)) {
      throw ParameterError("exp_rsft requires lambda > 0");
    }
  } else if (lambda) {
    throw ParameterError("lambda is only meaningful for exp_rsft");
  }
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be > 0");
  if (epochs < 0) throw ParameterError("epochs must be >= 0");
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
}

TrainConfig TrainConfig::defaults(Algorithm algorithm, bool trajectory_mode) {
  TrainConfig c;
  c.algorithm = algorithm;
  if (algorithm == Algorithm::kExpRsft) c.lambda = 1.0;
  c.trajectory_mode = trajectory_mode;
  c.standardize_rewards = trajectory_mode;
  return c;
}

namespace {

std::vector<double> unit_rewards(const OfflineDataset& ds, bool trajectory_mode) {
  std::vector<double> r;
  if (trajectory_mode) {
    for (const auto& tau : ds.trajectories) r.push_back(tau.ret);
  } else {
    for (const auto& x : ds.interactions) r.push_back(x.observed_reward);
  }
  return r;
}

double standardized(double r, const TrainConfig& config, const RewardStats& stats) {
  if (!config.standardize_rewards) return r;
  return stats.stddev > 0.0 ? (r - stats.mean) / stats.stddev : 0.0;
}

}  // namespace

RewardStats reward_stats(const OfflineDataset& ds, bool trajectory_mode) {
  const auto r = unit_rewards(ds, trajectory_mode);
  if (r.empty()) return {};
  double sum = 0.0;
  for (double v : r) sum += v;
  const double mean = sum / static_cast<double>(r.size());
  double ss = 0.0;
  for (double v : r) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(r.size()))};
}

double example_weight(double reward, const TrainConfig& config, const RewardStats& stats) {
  if (!std::isfinite(reward)) throw ParameterError("reward must be finite");
  switch (config.algorithm) {
    case Algorithm::kBc:
      return 1.0;
    case Algorithm::kRsft:
      return config.clamp_negative_weights ? std::max(reward, 0.0) : reward;
    case Algorithm::kExpRsft: {
      const double w = std::exp(standardized(reward, config, stats) / *config.lambda);
      if (!std::isfinite(w)) {
        throw DivergenceError("exponential weight overflow for reward " + std::to_string(reward) +
                              "; standardize rewards or use a larger lambda");
      }
      return w;
    }
  }
  return 1.0;
}

WeightSummary training_weights(const OfflineDataset& ds, const TrainConfig& config) {
  config.validate();
  const auto rewards = unit_rewards(ds, config.trajectory_mode);
  const RewardStats stats = reward_stats(ds, config.trajectory_mode);
  WeightSummary out;
  out.weights.reserve(rewards.size());

  if (config.algorithm == Algorithm::kExpRsft && config.normalize_weights) {
    Vector log_w(static_cast<Eigen::Index>(rewards.size()));
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      log_w[static_cast<Eigen::Index>(i)] = standardized(rewards[i], config, stats) / *config.lambda;
    }
    const double log_mean = log_sum_exp(log_w) - std::log(static_cast<double>(rewards.size()));
    for (Eigen::Index i = 0; i < log_w.size(); ++i) out.weights.push_back(std::exp(log_w[i] - log_mean));
    out.normalizer = std::exp(log_mean);
    return out;
  }

  for (double r : rewards) {
    const double w = example_weight(r, config, stats);
    if (w < 0.0) ++out.negative;
    out.weights.push_back(w);
  }
  if (config.normalize_weights) {
    double mean = 0.0;
    for (double w : out.weights) mean += w;
    mean /= static_cast<double>(out.weights.size());
    if (!(mean > 0.0)) throw ParameterError("cannot normalize weights with a non-positive mean");
    for (double& w : out.weights) w /= mean;
    out.normalizer = mean;
  }
  return out;
}

LossGradient weighted_nll_loss(const ParametricPolicy& policy, const OfflineDataset& ds,
                               std::span<const BatchUnit> batch) {
  if (batch.empty()) throw ParameterError("weighted_nll_loss: empty batch");
  const auto& model = policy.model();
  LossGradient out{0.0, model.zero_gradient()};
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  for (const auto& unit : batch) {
    if (!std::isfinite(unit.weight)) {
      throw DivergenceError("non-finite example weight; standardize rewards or use a larger lambda");
    }
  }

  if (model.tabular()) {
    // Steps sharing a context id share logits; aggregate per context.
    struct Aggregate {
      double total = 0.0;
      std::map<int, double> per_action;
    };
    std::map<int, Aggregate> by_context;
    for (const auto& unit : batch) {
      for (const auto& step : unit.steps) {
        auto& agg = by_context[step.context];
        agg.total += unit.weight;
        agg.per_action[step.action] += unit.weight;
      }
    }
    for (const auto& [s, agg] : by_context) {
      const Context c{s, {}};
      const Vector x = model.encode(c);
      const Vector logp = log_softmax(model.scores_from_features(x));
      Vector grad = agg.total * logp.array().exp();
      for (const auto& [a, w] : agg.per_action) {
        out.loss -= w * logp[a];
        grad[a] -= w;
      }
      model.accumulate(c, x, grad * inv_b, out.gradient);
    }
  } else {
    for (const auto& unit : batch) {
      for (const auto& step : unit.steps) {
        const Context c = ds.context_of(step);
        const Vector x = model.encode(c);
        const Vector logp = log_softmax(model.scores_from_features(x));
        Vector grad = unit.weight * logp.array().exp();
        grad[step.action] -= unit.weight;
        out.loss -= unit.weight * logp[step.action];
        model.accumulate(c, x, grad * inv_b, out.gradient);
      }
    }
  }
  out.loss *= inv_b;
  return out;
}

std::string TrainTrace::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "epoch,loss,true_value,kl_to_tilt,ndcg10,ndcg50,hr10,hr50,mrr\n";
  auto opt = [&](const std::optional<double>& v) {
    if (v) out << *v;
  };
  for (const auto& r : records) {
    out << r.epoch << ',' << r.loss << ',';
    opt(r.true_value);
    out << ',';
    opt(r.kl_to_tilt);
    if (r.metrics) {
      const auto& m = *r.metrics;
      out << ',' << m.ndcg10 << ',' << m.ndcg50 << ',' << m.hr10 << ',' << m.hr50 << ',' << m.mrr;
    } else {
      out << ",,,,,";
    }
    out << '\n';
  }
  return out.str();
}

TrainResult train(const OfflineDataset& ds, const TrainConfig& config, ParametricPolicy initial,
                  const EpochObserver& observer) {
  config.validate();
  ds.validate();
  if (config.trajectory_mode && !ds.trajectory_mode()) {
    throw ParameterError("trajectory_mode requires a trajectory dataset");
  }
  if (initial.n_actions() != ds.catalog.n_actions) {
    throw ParameterError("policy and dataset disagree on the number of actions");
  }

  const WeightSummary weights = training_weights(ds, config);
  std::vector<BatchUnit> units;
  if (config.trajectory_mode) {
    for (std::size_t j = 0; j < ds.trajectories.size(); ++j) {
      units.push_back({ds.trajectories[j].steps, weights.weights[j]});
    }
  } else {
    for (std::size_t i = 0; i < ds.interactions.size(); ++i) {
      units.push_back({std::span<const LoggedInteraction>(&ds.interactions[i], 1), weights.weights[i]});
    }
  }

  TrainResult result{std::move(initial), {}};
  result.trace.negative_weights = weights.negative;
  if (weights.negative > 0) {
    std::cerr << "warning: " << weights.negative
              << " negative linear weights; their log-likelihood terms push probability away from "
                 "logged actions\n";
  }

  std::vector<std::size_t> order(units.size());
  std::vector<BatchUnit> batch;
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    make_stream(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)).shuffle(order);
    double epoch_loss = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(units[order[k]]);
      LossGradient lg = weighted_nll_loss(result.policy, ds, batch);
      if (!std::isfinite(lg.loss) || !lg.gradient.item_embeddings.allFinite() ||
          !lg.gradient.item_bias.allFinite() || !lg.gradient.context_table.allFinite()) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batch_index));
      }
      result.policy.model().apply(lg.gradient, config.learning_rate);
      epoch_loss += lg.loss * static_cast<double>(batch.size());
    }
    EpochRecord record;
    record.epoch = epoch;
    record.loss = epoch_loss / static_cast<double>(units.size());
    if (observer) observer(result.policy, record);
    result.trace.records.push_back(std::move(record));
  }
  return result;
}

TabularPolicy empirical_logging_policy(const OfflineDataset& ds) {
  const int n_s = ds.catalog.n_contexts;
  const int n_a = ds.catalog.n_actions;
  Matrix counts = Matrix::Zero(n_s, n_a);
  for (const auto& x : ds.interactions) counts(x.context, x.action) += 1.0;
  for (int s = 0; s < n_s; ++s) {
    const double total = counts.row(s).sum();
    if (total > 0.0) {
      counts.row(s) /= total;
    } else {
      counts.row(s).setConstant(1.0 / n_a);
    }
  }
  return TabularPolicy(std::move(counts));
}

Matrix empirical_mean_rewards(const OfflineDataset& ds) {
  const int n_s = ds.catalog.n_contexts;
  const int n_a = ds.catalog.n_actions;
  Matrix sums = Matrix::Zero(n_s, n_a);
  Matrix counts = Matrix::Zero(n_s, n_a);
  for (const auto& x : ds.interactions) {
    sums(x.context, x.action) += x.observed_reward;
    counts(x.context, x.action) += 1.0;
  }
  Matrix means(n_s, n_a);
  for (int s = 0; s < n_s; ++s) {
    const bool seen = counts.row(s).sum() > 0.0;
    for (int a = 0; a < n_a; ++a) {
      if (counts(s, a) > 0.0) {
        means(s, a) = sums(s, a) / counts(s, a);
      } else {
        means(s, a) = seen ? -std::numeric_limits<double>::infinity() : 0.0;
      }
    }
  }
  return means;
}

TabularPolicy empirical_tilt(const OfflineDataset& ds, double lambda) {
  return exp_tilt(empirical_logging_policy(ds), empirical_mean_rewards(ds), lambda).policy;
}

double mean_projection_kl(const TabularPolicy& reference, const TabularPolicy& policy,
                          const Vector& weights) {
  double total = 0.0;
  for (int s = 0; s < reference.n_contexts(); ++s) {
    if (weights[s] <= 0.0) continue;
    total += weights[s] * kl_projection(reference.row(s), policy.row(s));
  }
  return total / weights.sum();
}

double max_projection_kl(const TabularPolicy& reference, const TabularPolicy& policy,
                         const Vector& weights) {
  double worst = 0.0;
  for (int s = 0; s < reference.n_contexts(); ++s) {
    if (weights[s] <= 0.0) continue;
    worst = std::max(worst, kl_projection(reference.row(s), policy.row(s)));
  }
  return worst;
}

EpochObserver oracle_observer(const SyntheticEnvironment& env, std::span<const TestCase> cases,
                              MetricSettings settings,
                              const std::optional<TabularPolicy>& reference,
                              const Vector* reference_weights) {
  return [&env, cases, settings, &reference, reference_weights](const ParametricPolicy& policy,
                                                                EpochRecord& record) {
    const TabularPolicy table = policy.table();
    record.true_value = policy_value(env, table).expected;
    if (reference) {
      const Vector w = reference_weights ? *reference_weights : env.context_dist;
      record.kl_to_tilt = mean_projection_kl(*reference, table, w);
    }
    if (!cases.empty()) {
      auto m = compute_metrics(scorer_for(table), cases, settings);
      m.oracle_value = record.true_value;
      record.metrics = m;
    }
  };
}

SweepMetrics sweep_metrics(const EpochRecord& record) {
  SweepMetrics m;
  m.oracle_value = record.true_value.value_or(0.0);
  if (record.metrics) {
    m.ndcg10 = record.metrics->ndcg10;
    m.ndcg50 = record.metrics->ndcg50;
    m.hr10 = record.metrics->hr10;
    m.hr50 = record.metrics->hr50;
    m.mrr = record.metrics->mrr;
  }
  return m;
}

std::vector<SweepRow> lambda_sweep(const OfflineDataset& ds, const SyntheticEnvironment& env,
                                   std::span<const TestCase> cases,
                                   std::span<const double> lambda_grid,
                                   const TrainConfig& config_base, const ParametricPolicy& initial,
                                   const MetricSettings& settings, int n_threads) {
  if (lambda_grid.empty()) throw ParameterError("lambda grid is empty");
  for (double l : lambda_grid) {
    if (!(l > 0.0)) throw ParameterError("lambda grid entries must be > 0");
  }
  if (config_base.epochs < 1) throw ParameterError("lambda sweep needs at least one epoch");

  std::vector<SweepRow> rows(lambda_grid.size());
  auto run_one = [&](std::size_t i) {
    TrainConfig config = config_base;
    config.algorithm = Algorithm::kExpRsft;
    config.lambda = lambda_grid[i];
    const std::optional<TabularPolicy> no_reference;
    auto result = train(ds, config, initial, oracle_observer(env, cases, settings, no_reference));
    SweepRow row;
    row.lambda = lambda_grid[i];
    row.final = sweep_metrics(result.trace.records.back());
    row.best = row.final;
    for (const auto& rec : result.trace.records) {
      const auto m = sweep_metrics(rec);
      row.best.oracle_value = std::max(row.best.oracle_value, m.oracle_value);
      row.best.ndcg10 = std::max(row.best.ndcg10, m.ndcg10);
      row.best.ndcg50 = std::max(row.best.ndcg50, m.ndcg50);
      row.best.hr10 = std::max(row.best.hr10, m.hr10);
      row.best.hr50 = std::max(row.best.hr50, m.hr50);
      row.best.mrr = std::max(row.best.mrr, m.mrr);
    }
    row.trace = std::move(result.trace);
    rows[i] = std::move(row);
  };

  const auto workers = static_cast<std::size_t>(std::max(1, n_threads));
  if (workers == 1) {
    for (std::size_t i = 0; i < rows.size(); ++i) run_one(i);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, rows.size()); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < rows.size(); i = next++) {
          try {
            run_one(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

}  // namespace ersft
