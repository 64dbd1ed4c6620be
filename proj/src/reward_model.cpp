#include "ersft/reward_model.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "ersft/error.hpp"
#include "ersft/random.hpp"

namespace ersft {

void RewardModelConfig::validate() const {
  if (dim < 1) throw ParameterError("reward model dim must be >= 1");
  if (!(learning_rate > 0.0)) throw ParameterError("reward model learning_rate must be > 0");
  if (epochs < 0) throw ParameterError("reward model epochs must be >= 0");
  if (batch_size < 1) throw ParameterError("reward model batch_size must be >= 1");
  if (l2 < 0.0) throw ParameterError("reward model l2 must be >= 0");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ParameterError("validation_fraction must be in (0, 1)");
  }
}

RewardModel::RewardModel(int n_contexts, int n_actions, const RewardModelConfig& config)
    : model_(n_contexts, n_actions, config.dim, config.encoding, config.seed, config.init_scale) {}

double RewardModel::predict(const Context& c, int action) const {
  return model_.score(model_.encode(c), action) + global_bias_;
}

Vector RewardModel::predict_all(const Context& c) const {
  return model_.scores(c).array() + global_bias_;
}

Matrix RewardModel::table() const {
  if (!model_.tabular()) throw ParameterError("reward table needs a tabular context encoding");
  Matrix out = model_.context_table() * model_.item_embeddings().transpose();
  out.rowwise() += model_.item_bias().transpose();
  return out.array() + global_bias_;
}

ErrorStats prediction_errors(const OfflineDataset& split,
                             const std::function<double(const LoggedInteraction&)>& predictor) {
  if (split.interactions.empty()) throw ParameterError("cannot evaluate on an empty split");
  ErrorStats e;
  for (const auto& x : split.interactions) {
    const double d = predictor(x) - x.observed_reward;
    e.mse += d * d;
    e.mae += std::abs(d);
  }
  e.n = split.interactions.size();
  e.mse /= static_cast<double>(e.n);
  e.mae /= static_cast<double>(e.n);
  return e;
}

std::pair<OfflineDataset, OfflineDataset> split_dataset(const OfflineDataset& ds,
                                                        double validation_fraction,
                                                        std::uint64_t seed) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ParameterError("validation_fraction must be in (0, 1)");
  }
  const std::size_t n = ds.interactions.size();
  const auto n_val = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(n)));
  if (n_val == 0 || n_val == n) throw ParameterError("dataset too small to split");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  make_stream(seed, "split").shuffle(order);

  OfflineDataset train, validation;
  for (auto* part : {&train, &validation}) {
    part->catalog = ds.catalog;
    part->sequences = ds.sequences;
  }
  std::vector<char> in_val(n, 0);
  for (std::size_t k = 0; k < n_val; ++k) in_val[order[k]] = 1;
  // Keep the original interaction order inside each part.
  for (std::size_t i = 0; i < n; ++i) {
    (in_val[i] ? validation : train).interactions.push_back(ds.interactions[i]);
  }
  train.refresh_context_dist();
  validation.refresh_context_dist();
  return {std::move(train), std::move(validation)};
}

RewardModelFit train_reward_model(const OfflineDataset& train, const OfflineDataset& validation,
                                  const RewardModelConfig& config) {
  config.validate();
  if (train.interactions.empty()) throw ParameterError("reward model needs training data");
  RewardModel rm(train.catalog.n_contexts, train.catalog.n_actions, config);
  double mean = 0.0;
  for (const auto& x : train.interactions) mean += x.observed_reward;
  rm.set_global_bias(mean / static_cast<double>(train.interactions.size()));

  std::vector<std::size_t> order(train.interactions.size());
  const auto bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    make_stream(config.seed, "rm_shuffle", static_cast<std::uint64_t>(epoch)).shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      const double inv_b = 1.0 / static_cast<double>(end - start);
      ModelGradient g = rm.model().zero_gradient();
      for (std::size_t k = start; k < end; ++k) {
        const auto& x = train.interactions[order[k]];
        const Context c = train.context_of(x);
        const Vector feat = rm.model().encode(c);
        const double pred = rm.model().score(feat, x.action) + rm.global_bias();
        const double d = 2.0 * (pred - x.observed_reward) * inv_b;
        rm.model().accumulate(c, feat, x.action, d, g);
        g.global_bias += d;
      }
      if (config.l2 > 0.0) {
        g.item_embeddings += 2.0 * config.l2 * rm.model().item_embeddings();
        if (config.encoding == ContextEncoding::kLearnedTable) {
          g.context_table += 2.0 * config.l2 * rm.model().context_table();
        }
      }
      if (!std::isfinite(g.global_bias) || !g.item_embeddings.allFinite()) {
        throw DivergenceError("reward model diverged at epoch " + std::to_string(epoch));
      }
      rm.model().apply(g, config.learning_rate);
      rm.set_global_bias(rm.global_bias() - config.learning_rate * g.global_bias);
    }
  }

  RewardModelFit fit{std::move(rm), {}};
  auto predictor = [&](const OfflineDataset& part) {
    return [&fit, &part](const LoggedInteraction& x) {
      return fit.model.predict(part.context_of(x), x.action);
    };
  };
  fit.report.train = prediction_errors(train, predictor(train));
  if (!validation.interactions.empty()) {
    fit.report.validation = prediction_errors(validation, predictor(validation));
  }
  return fit;
}

RewardModelFit train_reward_model(const OfflineDataset& ds, const RewardModelConfig& config) {
  config.validate();
  auto [train, validation] = split_dataset(ds, config.validation_fraction, config.seed);
  return train_reward_model(train, validation, config);
}

NaivePredictors NaivePredictors::fit(const OfflineDataset& train) {
  if (train.interactions.empty()) throw ParameterError("naive predictors need training data");
  const auto n_s = static_cast<std::size_t>(train.catalog.n_contexts);
  const auto n_a = static_cast<std::size_t>(train.catalog.n_actions);
  std::vector<double> us(n_s, 0.0), uc(n_s, 0.0), is(n_a, 0.0), ic(n_a, 0.0);
  double total = 0.0;
  for (const auto& x : train.interactions) {
    us[static_cast<std::size_t>(x.context)] += x.observed_reward;
    uc[static_cast<std::size_t>(x.context)] += 1.0;
    is[static_cast<std::size_t>(x.action)] += x.observed_reward;
    ic[static_cast<std::size_t>(x.action)] += 1.0;
    total += x.observed_reward;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  NaivePredictors p;
  p.global_mean = total / static_cast<double>(train.interactions.size());
  p.user_mean.resize(n_s);
  p.item_mean.resize(n_a);
  for (std::size_t s = 0; s < n_s; ++s) p.user_mean[s] = uc[s] > 0 ? us[s] / uc[s] : nan;
  for (std::size_t a = 0; a < n_a; ++a) p.item_mean[a] = ic[a] > 0 ? is[a] / ic[a] : nan;
  return p;
}

double NaivePredictors::predict_item(int action) const {
  const double v = item_mean.at(static_cast<std::size_t>(action));
  return std::isnan(v) ? global_mean : v;
}

double NaivePredictors::predict_user(int context, int action) const {
  const double v = user_mean.at(static_cast<std::size_t>(context));
  return std::isnan(v) ? predict_item(action) : v;
}

std::vector<PredictorRow> evaluate_predictors(const OfflineDataset& split, const RewardModel& rm,
                                              const NaivePredictors& naive) {
  std::vector<PredictorRow> rows;
  rows.push_back({"user_mean", prediction_errors(split, [&](const LoggedInteraction& x) {
                    return naive.predict_user(x.context, x.action);
                  })});
  rows.push_back({"item_mean", prediction_errors(split, [&](const LoggedInteraction& x) {
                    return naive.predict_item(x.action);
                  })});
  rows.push_back({"global_mean", prediction_errors(split, [&](const LoggedInteraction&) {
                    return naive.global_mean;
                  })});
  rows.push_back({"reward_model", prediction_errors(split, [&](const LoggedInteraction& x) {
                    return rm.predict(split.context_of(x), x.action);
                  })});
  return rows;
}

}  // namespace ersft
