#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ersft/bandit.hpp"
#include "ersft/embedding_model.hpp"

namespace ersft {

struct RewardModelConfig {
  int dim = 8;
  ContextEncoding encoding = ContextEncoding::kLearnedTable;
  double init_scale = 0.1;
  double learning_rate = 0.05;
  int epochs = 20;
  int batch_size = 64;
  double l2 = 0.0;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Scalar regression head on the embedding model:
/// r~(s, a) = u(s) . v(a) + b_a + b0.
class RewardModel {
 public:
  RewardModel() = default;
  RewardModel(int n_contexts, int n_actions, const RewardModelConfig& config);

  double predict(const Context& c, int action) const;
  Vector predict_all(const Context& c) const;
  /// |S| x |A| table of predictions (tabular encodings only).
  Matrix table() const;

  const EmbeddingModel& model() const { return model_; }
  EmbeddingModel& model() { return model_; }
  double global_bias() const { return global_bias_; }
  void set_global_bias(double b) { global_bias_ = b; }

 private:
  EmbeddingModel model_;
  double global_bias_ = 0.0;
};

struct ErrorStats {
  double mse = 0.0;
  double mae = 0.0;
  std::size_t n = 0;
};

/// MSE = mean (pred - r_hat)^2 and MAE = mean |pred - r_hat| over `split`.
ErrorStats prediction_errors(const OfflineDataset& split,
                             const std::function<double(const LoggedInteraction&)>& predictor);

struct FitReport {
  ErrorStats train;
  ErrorStats validation;
};

struct RewardModelFit {
  RewardModel model;
  FitReport report;
};

/// Seeded random partition of the interactions into (train, validation).
std::pair<OfflineDataset, OfflineDataset> split_dataset(const OfflineDataset& ds,
                                                        double validation_fraction,
                                                        std::uint64_t seed);

/// Mini-batch SGD on the squared error, using logged (s, a, r_hat) only.
/// b0 starts at the training mean reward.
RewardModelFit train_reward_model(const OfflineDataset& train, const OfflineDataset& validation,
                                  const RewardModelConfig& config);
/// Splits `ds` with config.validation_fraction, then trains.
RewardModelFit train_reward_model(const OfflineDataset& ds, const RewardModelConfig& config);

/// Historical-average predictors fitted on a training split. Unseen users fall
/// back to the item mean, unseen items to the global mean.
struct NaivePredictors {
  std::vector<double> user_mean;  // NaN for unseen contexts
  std::vector<double> item_mean;  // NaN for unseen actions
  double global_mean = 0.0;

  static NaivePredictors fit(const OfflineDataset& train);
  double predict_user(int context, int action) const;
  double predict_item(int action) const;
};

struct PredictorRow {
  std::string name;
  ErrorStats errors;
};

/// Rows: user_mean, item_mean, global_mean, reward_model. Throws on an empty split.
std::vector<PredictorRow> evaluate_predictors(const OfflineDataset& split, const RewardModel& rm,
                                              const NaivePredictors& naive);

}  // namespace ersft
