#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "ersft/error.hpp"
#include "ersft/random.hpp"
#include "ersft/tilt.hpp"
#include "ersft/train.hpp"

using namespace ersft;

namespace {

TrainConfig exp_config(double lambda, int epochs = 5) {
  TrainConfig c;
  c.algorithm = Algorithm::kExpRsft;
  c.lambda = lambda;
  c.epochs = epochs;
  c.batch_size = 32;
  c.learning_rate = 0.5;
  c.seed = 3;
  return c;
}

ParametricPolicy one_hot_policy(int n_s, int n_a, std::uint64_t seed = 1) {
  return ParametricPolicy({n_s, n_a, n_s, ContextEncoding::kOneHotTable, 0.1}, seed);
}

}  // namespace

TEST(Weights, PerAlgorithm) {
  auto c = exp_config(0.5);
  EXPECT_NEAR(example_weight(1.0, c), std::exp(2.0), 1e-15);
  c.algorithm = Algorithm::kBc;
  c.lambda.reset();
  EXPECT_EQ(example_weight(-3.0, c), 1.0);
  c.algorithm = Algorithm::kRsft;
  EXPECT_EQ(example_weight(-3.0, c), -3.0);
  c.clamp_negative_weights = true;
  EXPECT_EQ(example_weight(-3.0, c), 0.0);
  EXPECT_EQ(parse_algorithm("exp-rsft"), Algorithm::kExpRsft);
  EXPECT_THROW(parse_algorithm("sft"), ParameterError);
}

TEST(Weights, ConfigValidation) {
  TrainConfig c;
  c.algorithm = Algorithm::kExpRsft;
  EXPECT_THROW(c.validate(), ParameterError);  // lambda missing
  c.lambda = 0.0;
  EXPECT_THROW(c.validate(), ParameterError);
  c.algorithm = Algorithm::kBc;
  c.lambda = 1.0;
  EXPECT_THROW(c.validate(), ParameterError);
}

TEST(Weights, OverflowIsADivergence) {
  EXPECT_THROW(example_weight(10.0, exp_config(1e-4)), DivergenceError);
  // Normalizing in the log domain survives the same rewards.
  const auto env = make_low_rank_env(2, 3, 1, 10.0, 1.0, 1);
  const auto ds = sample_dataset(env, 50, 2);
  auto c = exp_config(1e-2);
  c.normalize_weights = true;
  const auto w = training_weights(ds, c);
  double mean = 0.0;
  for (double x : w.weights) {
    ASSERT_TRUE(std::isfinite(x));
    mean += x / 50.0;
  }
  EXPECT_NEAR(mean, 1.0, 1e-12);
}

TEST(Loss, UniformPolicyGivesLogA) {
  auto policy = one_hot_policy(2, 4);
  policy.model().mutable_item_embeddings().setZero();
  policy.model().mutable_item_bias().setZero();
  OfflineDataset ds;
  ds.catalog = {2, 4};
  ds.interactions = {{0, 1, 0.0, -1}, {1, 3, 0.0, -1}};
  ds.refresh_context_dist();
  const std::vector<BatchUnit> batch{{{&ds.interactions[0], 1}, 1.0}, {{&ds.interactions[1], 1}, 3.0}};
  const auto lg = weighted_nll_loss(policy, ds, batch);
  EXPECT_NEAR(lg.loss, 2.0 * std::log(4.0), 1e-14);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  Rng rng(17);
  const ContextEncoding encodings[] = {ContextEncoding::kLearnedTable, ContextEncoding::kOneHotTable,
                                       ContextEncoding::kHistoryMean};
  for (int inst = 0; inst < 50; ++inst) {
    const ContextEncoding enc = encodings[inst % 3];
    const int n_s = 2 + static_cast<int>(rng.index(4));
    const int n_a = 2 + static_cast<int>(rng.index(6));
    const int dim = enc == ContextEncoding::kOneHotTable ? n_s : 2 + static_cast<int>(rng.index(3));
    ParametricPolicy policy({n_s, n_a, dim, enc, 0.5}, 100 + static_cast<std::uint64_t>(inst));

    OfflineDataset ds;
    ds.catalog = {n_s, n_a};
    if (enc == ContextEncoding::kHistoryMean) {
      ds.sequences.resize(static_cast<std::size_t>(n_s));
      for (auto& seq : ds.sequences) {
        for (int k = 0; k < 4; ++k) seq.push_back(static_cast<int>(rng.index(n_a)));
      }
    }
    for (int i = 0; i < 6; ++i) {
      const int s = static_cast<int>(rng.index(n_s));
      const int pos = enc == ContextEncoding::kHistoryMean ? 1 + static_cast<int>(rng.index(3)) : -1;
      const int a = pos >= 0 ? ds.sequences[s][pos] : static_cast<int>(rng.index(n_a));
      ds.interactions.push_back({s, a, rng.uniform(), pos});
    }
    ds.refresh_context_dist();
    std::vector<BatchUnit> batch;
    for (const auto& x : ds.interactions) batch.push_back({{&x, 1}, rng.uniform(0.1, 3.0)});

    const auto lg = weighted_nll_loss(policy, ds, batch);
    std::vector<double> grad;
    const auto& g = lg.gradient;
    grad.insert(grad.end(), g.item_embeddings.data(), g.item_embeddings.data() + g.item_embeddings.size());
    grad.insert(grad.end(), g.item_bias.data(), g.item_bias.data() + g.item_bias.size());
    grad.insert(grad.end(), g.context_table.data(), g.context_table.data() + g.context_table.size());

    const auto theta = policy.model().flatten();
    // The one-hot table is frozen, so only item parameters move.
    const std::size_t n_free =
        enc == ContextEncoding::kOneHotTable
            ? static_cast<std::size_t>(g.item_embeddings.size() + g.item_bias.size())
            : theta.size();
    ASSERT_LE(n_free, grad.size());
    const double h = 1e-6;
    for (std::size_t i = 0; i < n_free; ++i) {
      auto plus = theta;
      auto minus = theta;
      plus[i] += h;
      minus[i] -= h;
      ParametricPolicy p = policy;
      p.model().assign(plus);
      const double lp = weighted_nll_loss(p, ds, batch).loss;
      p.model().assign(minus);
      const double lm = weighted_nll_loss(p, ds, batch).loss;
      const double fd = (lp - lm) / (2 * h);
      ASSERT_NEAR(grad[i], fd, 1e-4 * std::max(1.0, std::abs(fd))) << "instance " << inst << " param " << i;
    }
  }
}

TEST(Train, ExpRsftProjectsOntoTheEmpiricalTilt) {
  const auto env = make_low_rank_env(3, 5, 2, 1.0, 0.5, 4);
  const auto ds = sample_dataset(env, 3000, 5);
  auto c = exp_config(0.5, 600);
  c.normalize_weights = true;
  c.batch_size = 100;
  const auto result = train(ds, c, one_hot_policy(3, 5));
  const auto target = empirical_tilt(ds, 0.5);
  EXPECT_LE(max_projection_kl(target, result.policy.table(), ds.empirical_context_dist), 1e-3);
}

TEST(Train, BehaviorCloningRecoversLoggingPolicy) {
  const auto env = make_low_rank_env(3, 5, 2, 1.0, 1.0, 4);
  const auto ds = sample_dataset(env, 3000, 6);
  TrainConfig c;
  c.algorithm = Algorithm::kBc;
  c.epochs = 1500;
  c.batch_size = 3000;  // full batch, so the iterates settle
  c.learning_rate = 2.0;
  const auto result = train(ds, c, one_hot_policy(3, 5));
  const auto empirical = empirical_logging_policy(ds);
  const auto learned = result.policy.table();
  for (int s = 0; s < 3; ++s) {
    EXPECT_LT(tv_distance(learned.row(s), empirical.row(s)), 1e-2);
    EXPECT_LT(tv_distance(learned.row(s), env.logging_policy.row(s)), 0.1);
  }
}

TEST(Train, SameSeedSamePolicy) {
  const auto env = make_low_rank_env(4, 6, 2, 1.0, 1.0, 2, NoiseModel::gaussian(0.2));
  const auto ds = sample_dataset(env, 500, 3);
  const auto a = train(ds, exp_config(0.3), ParametricPolicy({4, 6, 3, ContextEncoding::kLearnedTable, 0.1}, 9));
  const auto b = train(ds, exp_config(0.3), ParametricPolicy({4, 6, 3, ContextEncoding::kLearnedTable, 0.1}, 9));
  EXPECT_TRUE(a.policy == b.policy);
  EXPECT_EQ(a.trace.to_csv(), b.trace.to_csv());
  auto other = exp_config(0.3);
  other.seed = 4;
  const auto c = train(ds, other, ParametricPolicy({4, 6, 3, ContextEncoding::kLearnedTable, 0.1}, 9));
  EXPECT_FALSE(a.policy == c.policy);
}

TEST(Train, HorizonOneTrajectoriesMatchBanditTraining) {
  const auto env = make_low_rank_env(4, 6, 2, 1.0, 1.0, 2, NoiseModel::gaussian(0.2));
  const auto bandit = sample_dataset(env, 400, 8);
  const auto traj = sample_trajectories(env, 400, 1, 8);
  auto c = exp_config(0.4);
  const auto a = train(bandit, c, one_hot_policy(4, 6));
  c.trajectory_mode = true;
  const auto b = train(traj, c, one_hot_policy(4, 6));
  EXPECT_TRUE(a.policy == b.policy);
}

TEST(Train, StandardizationIsALambdaReparametrization) {
  const auto env = make_low_rank_env(3, 5, 2, 1.0, 1.0, 2, NoiseModel::gaussian(0.3));
  const auto ds = sample_dataset(env, 400, 8);
  const auto stats = reward_stats(ds, false);
  auto c = exp_config(0.7);
  c.normalize_weights = true;
  c.standardize_rewards = true;
  const auto a = train(ds, c, one_hot_policy(3, 5));
  c.standardize_rewards = false;
  c.lambda = 0.7 * stats.stddev;
  const auto b = train(ds, c, one_hot_policy(3, 5));
  EXPECT_LT((a.policy.table().probs() - b.policy.table().probs()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Train, DivergenceNamesEpochAndBatch) {
  const auto env = make_low_rank_env(3, 5, 2, 1.0, 1.0, 2);
  const auto ds = sample_dataset(env, 100, 8);
  auto c = exp_config(1.0);
  c.learning_rate = 1e300;
  c.batch_size = 10;
  try {
    train(ds, c, ParametricPolicy({3, 5, 3, ContextEncoding::kLearnedTable, 0.5}, 1));
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("batch"), std::string::npos);
  }
}

TEST(Train, NegativeLinearWeightsAreCounted) {
  OfflineDataset ds;
  ds.catalog = {1, 3};
  ds.interactions = {{0, 0, -1.0, -1}, {0, 1, 2.0, -1}, {0, 2, 1.0, -1}};
  ds.refresh_context_dist();
  TrainConfig c;
  c.algorithm = Algorithm::kRsft;
  c.epochs = 1;
  EXPECT_EQ(train(ds, c, one_hot_policy(1, 3)).trace.negative_weights, 1u);
  c.clamp_negative_weights = true;
  EXPECT_EQ(train(ds, c, one_hot_policy(1, 3)).trace.negative_weights, 0u);
}

TEST(Train, CheckpointRoundTrip) {
  const auto env = make_low_rank_env(3, 5, 2, 1.0, 1.0, 2);
  const auto ds = sample_dataset(env, 100, 8);
  const auto result = train(ds, exp_config(1.0), ParametricPolicy({3, 5, 2, ContextEncoding::kLearnedTable, 0.3}, 4));
  const auto dir = std::filesystem::temp_directory_path() / "ersft_ckpt_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(result.policy, dir / "policy.json", dir / "policy.bin", {{"algo", "exp_rsft"}});
  const auto back = load_checkpoint(dir / "policy.json", dir / "policy.bin");
  EXPECT_TRUE(back == result.policy);
  std::filesystem::remove_all(dir);
}

TEST(Train, ObserverSeesEveryEpoch) {
  const auto env = make_low_rank_env(3, 5, 2, 1.0, 1.0, 2);
  const auto ds = sample_dataset(env, 100, 8);
  const auto result = train(ds, exp_config(1.0, 4), one_hot_policy(3, 5), oracle_observer(env, {}, {}));
  ASSERT_EQ(result.trace.records.size(), 4u);
  for (const auto& r : result.trace.records) {
    ASSERT_TRUE(r.true_value.has_value());
    EXPECT_GT(*r.true_value, 0.0);
  }
}
