#include "ersft/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ersft/error.hpp"
#include "ersft/random.hpp"
#include "ersft/tilt.hpp"

namespace ersft {

Json default_config() {
  return Json::parse(R"({
    "seed": 7,
    "env": {
      "n_contexts": 50, "n_actions": 100, "rank": 4, "r_max": 1.0,
      "popularity_skew": 1.0, "reward_correlation": 15.0,
      "noise": {"kind": "gaussian", "sigma": 0.5, "levels": 0}
    },
    "data": {"n_samples": 10000, "horizon": 0, "path": null},
    "policy": {"encoding": "one_hot", "dim": 0, "init_scale": 0.1},
    "pretrain": {"epochs": 20, "learning_rate": 0.5, "batch_size": 128},
    "train": {
      "algorithm": "exp_rsft", "lambda": 0.1, "epochs": 20, "learning_rate": 0.5,
      "batch_size": 128, "standardize_rewards": false, "normalize_weights": true,
      "clamp_negative_weights": false
    },
    "sweep": {"grid": [0.05, 0.1, 0.5, 1, 5, 50], "threads": 1},
    "metrics": {
      "threshold": 1.0, "exclude_history": false, "n_test_draws": 20000,
      "avg_reward_contexts": 1000, "n_generations": 10
    },
    "reward_model": {
      "dim": 0, "encoding": "one_hot", "init_scale": 0.5, "learning_rate": 0.3,
      "epochs": 50, "batch_size": 16, "l2": 0.0, "validation_fraction": 0.2
    },
    "ppo": {"clip": 0.2, "group_size": 8, "steps": 100, "inner_epochs": 4, "learning_rate": 20.0,
            "kl_coef": 0.0},
    "dpo": {"beta": 1.0, "pairs_per_context": 8, "steps": 100, "learning_rate": 50.0},
    "projection": {"n_contexts": 10, "n_actions": 20, "rank": 3, "n_samples": 5000,
                   "lambda": 0.5, "epochs": 3000, "learning_rate": 2.0, "batch_size": 5000},
    "bounds": {
      "threads": 1,
      "prop1": {"n_instances": 1000, "max_contexts": 20, "max_actions": 50,
                "lambda_grid": [0.1, 1, 10], "tolerance": 1e-12},
      "thm1": {"n_contexts": 1, "n_actions": 1000, "r_max": 1.0, "sigma": 1.0, "delta": 0.05,
               "lambda_grid": [0.5, 1, 5], "n_trials": 10000, "confidence": 0.99,
               "uniform_over_states": false},
      "thm2": {"n_contexts": 1, "n_actions": 100, "r_max": 1.0, "epsilon_grid": [0.05, 0.1, 0.3],
               "lambda_grid": [0.2, 1, 5], "n_trials": 1000, "tolerance": 1e-12},
      "min_lambda": {"sigma": 0.25, "n_actions": 1, "delta": 0.1353352832366127, "tau": 1.0,
                     "r_max": 1.0}
    }
  })");
}

namespace {

void check_keys(const Json& defaults, const Json& user, const std::string& where) {
  if (!user.is_object()) return;
  for (const auto& [key, value] : user.items()) {
    if (!defaults.contains(key)) throw ParameterError("unknown config key: " + where + key);
    if (defaults.at(key).is_object()) check_keys(defaults.at(key), value, where + key + ".");
  }
}

}  // namespace

Json resolve_config(const Json& user) {
  Json resolved = default_config();
  if (user.is_null()) return resolved;
  if (!user.is_object()) throw ParameterError("config must be a JSON object");
  check_keys(resolved, user, "");
  resolved.merge_patch(user);
  // merge_patch deletes keys set to null; restore the ones that are optional.
  if (!resolved["data"].contains("path")) resolved["data"]["path"] = nullptr;
  return resolved;
}

Json load_config(const std::filesystem::path& path) {
  Json user;
  try {
    user = Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw ParameterError("cannot parse config " + path.string() + ": " + e.what());
  }
  return resolve_config(user);
}

LowRankEnvSpec env_spec_from(const Json& config) {
  const Json& e = config.at("env");
  LowRankEnvSpec spec;
  spec.n_contexts = e.at("n_contexts").get<int>();
  spec.n_actions = e.at("n_actions").get<int>();
  spec.rank = e.at("rank").get<int>();
  spec.r_max = e.at("r_max").get<double>();
  spec.popularity_skew = e.at("popularity_skew").get<double>();
  spec.reward_correlation = e.at("reward_correlation").get<double>();
  spec.noise = noise_from_json(e.at("noise"));
  spec.seed = derive_seed(config.at("seed").get<std::uint64_t>(), "env");
  return spec;
}

PolicyShape policy_shape_from(const Json& config, int n_contexts, int n_actions) {
  const Json& p = config.at("policy");
  PolicyShape shape;
  shape.n_contexts = n_contexts;
  shape.n_actions = n_actions;
  shape.encoding = parse_encoding(p.at("encoding").get<std::string>());
  const int dim = p.at("dim").get<int>();
  // dim 0 means "full capacity" for the one-hot table and 8 otherwise.
  shape.dim = dim > 0 ? dim : (shape.encoding == ContextEncoding::kOneHotTable ? n_contexts : 8);
  shape.init_scale = p.at("init_scale").get<double>();
  return shape;
}

TrainConfig train_config_from(const Json& config, Algorithm algorithm) {
  const Json& t = config.at("train");
  const bool trajectories = config.at("data").at("horizon").get<int>() > 0;
  TrainConfig c = TrainConfig::defaults(algorithm, trajectories);
  if (algorithm == Algorithm::kExpRsft) c.lambda = t.at("lambda").get<double>();
  c.epochs = t.at("epochs").get<int>();
  c.learning_rate = t.at("learning_rate").get<double>();
  c.batch_size = t.at("batch_size").get<int>();
  c.standardize_rewards = algorithm == Algorithm::kExpRsft && t.at("standardize_rewards").get<bool>();
  c.normalize_weights = algorithm != Algorithm::kBc && t.at("normalize_weights").get<bool>();
  c.clamp_negative_weights = algorithm == Algorithm::kRsft && t.at("clamp_negative_weights").get<bool>();
  c.seed = derive_seed(config.at("seed").get<std::uint64_t>(), "train", 1);
  c.validate();
  return c;
}

TrainConfig pretrain_config_from(const Json& config) {
  const Json& p = config.at("pretrain");
  TrainConfig c = TrainConfig::defaults(Algorithm::kBc);
  c.epochs = p.at("epochs").get<int>();
  c.learning_rate = p.at("learning_rate").get<double>();
  c.batch_size = p.at("batch_size").get<int>();
  c.seed = derive_seed(config.at("seed").get<std::uint64_t>(), "train", 0);
  c.validate();
  return c;
}

MetricSettings metric_settings_from(const Json& config) {
  const Json& m = config.at("metrics");
  return {m.at("threshold").get<double>(), m.at("exclude_history").get<bool>()};
}

RewardModelConfig reward_model_config_from(const Json& config, int n_contexts) {
  const Json& r = config.at("reward_model");
  RewardModelConfig c;
  c.encoding = parse_encoding(r.at("encoding").get<std::string>());
  const int dim = r.at("dim").get<int>();
  c.dim = dim > 0 ? dim : (c.encoding == ContextEncoding::kOneHotTable ? n_contexts : 8);
  c.init_scale = r.at("init_scale").get<double>();
  c.learning_rate = r.at("learning_rate").get<double>();
  c.epochs = r.at("epochs").get<int>();
  c.batch_size = r.at("batch_size").get<int>();
  c.l2 = r.at("l2").get<double>();
  c.validation_fraction = r.at("validation_fraction").get<double>();
  c.seed = derive_seed(config.at("seed").get<std::uint64_t>(), "rm");
  c.validate();
  return c;
}

PpoConfig ppo_config_from(const Json& config) {
  const Json& p = config.at("ppo");
  PpoConfig c;
  c.clip = p.at("clip").get<double>();
  c.group_size = p.at("group_size").get<int>();
  c.steps = p.at("steps").get<int>();
  c.inner_epochs = p.at("inner_epochs").get<int>();
  c.learning_rate = p.at("learning_rate").get<double>();
  c.kl_coef = p.at("kl_coef").get<double>();
  c.seed = derive_seed(config.at("seed").get<std::uint64_t>(), "ppo");
  c.validate();
  return c;
}

DpoConfig dpo_config_from(const Json& config) {
  const Json& d = config.at("dpo");
  DpoConfig c;
  c.beta = d.at("beta").get<double>();
  c.pairs_per_context = d.at("pairs_per_context").get<int>();
  c.steps = d.at("steps").get<int>();
  c.learning_rate = d.at("learning_rate").get<double>();
  c.seed = derive_seed(config.at("seed").get<std::uint64_t>(), "dpo");
  c.validate();
  return c;
}

Benchmark build_benchmark(const Json& config, bool pretrain) {
  Benchmark b;
  b.config = config;
  const auto seed = config.at("seed").get<std::uint64_t>();
  b.env = make_low_rank_env(env_spec_from(config));
  const int horizon = config.at("data").at("horizon").get<int>();
  const int n = config.at("data").at("n_samples").get<int>();
  const auto data_seed = derive_seed(seed, "data");
  b.data = horizon > 0 ? sample_trajectories(b.env, n, horizon, data_seed)
                       : sample_dataset(b.env, n, data_seed);
  const MetricSettings settings = metric_settings_from(config);
  b.cases = sample_test_cases(b.env, config.at("metrics").at("n_test_draws").get<int>(),
                              settings.threshold, derive_seed(seed, "eval"));
  if (!pretrain) return b;
  const PolicyShape shape = policy_shape_from(config, b.env.catalog.n_contexts, b.env.catalog.n_actions);
  ParametricPolicy init(shape, derive_seed(seed, "train"));
  b.base = train(b.data, pretrain_config_from(config), std::move(init)).policy;
  return b;
}

namespace {

MetricsReport evaluate(const Benchmark& bench, const ParametricPolicy& policy) {
  const TabularPolicy table = policy.table();
  MetricsReport m = compute_metrics(scorer_for(table), bench.cases, metric_settings_from(bench.config));
  m.oracle_value = oracle_value(bench.env, table);
  return m;
}

}  // namespace

Outcome run_offline(const Benchmark& bench, Algorithm algorithm, std::optional<double> lambda) {
  TrainConfig c = train_config_from(bench.config, algorithm);
  if (lambda) {
    if (algorithm != Algorithm::kExpRsft) throw ParameterError("lambda only applies to exp_rsft");
    c.lambda = lambda;
  }
  const MetricSettings settings = metric_settings_from(bench.config);
  auto result = train(bench.data, c, bench.base, oracle_observer(bench.env, bench.cases, settings));
  Outcome out{algorithm_name(algorithm), std::move(result.policy), std::move(result.trace), 0.0, {}};
  out.metrics = evaluate(bench, out.policy);
  out.oracle_value = *out.metrics.oracle_value;
  return out;
}

SweepOutcome run_sweep(const Benchmark& bench, const std::vector<double>& grid) {
  const TrainConfig base_config = train_config_from(bench.config, Algorithm::kExpRsft);
  const int threads = bench.config.at("sweep").at("threads").get<int>();
  SweepOutcome out;
  out.rows = lambda_sweep(bench.data, bench.env, bench.cases, grid, base_config, bench.base,
                          metric_settings_from(bench.config), threads);
  out.bc = run_offline(bench, Algorithm::kBc);
  return out;
}

PeakInfo find_peak(const std::vector<double>& values) {
  PeakInfo p;
  if (values.empty()) return p;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[p.argmax]) p.argmax = i;
  }
  p.interior = p.argmax > 0 && p.argmax + 1 < values.size() &&
               values[p.argmax] > values.front() && values[p.argmax] > values.back();
  return p;
}

HackOutcome run_hack(const Benchmark& bench) {
  const Json& config = bench.config;
  const auto seed = config.at("seed").get<std::uint64_t>();
  const RewardModelConfig rm_config = reward_model_config_from(config, bench.env.catalog.n_contexts);
  HackOutcome out;
  auto [train_split, validation] = split_dataset(bench.data, rm_config.validation_fraction, rm_config.seed);
  out.rm = train_reward_model(train_split, validation, rm_config);
  out.predictors = evaluate_predictors(validation, out.rm.model, NaivePredictors::fit(train_split));

  const Json& m = config.at("metrics");
  const auto eval_contexts = sample_contexts(bench.env.context_dist,
                                             m.at("avg_reward_contexts").get<int>(),
                                             derive_seed(seed, "eval", 1));
  const int n_generations = m.at("n_generations").get<int>();
  const auto gen_seed = derive_seed(seed, "eval", 2);
  const MetricSettings settings = metric_settings_from(config);
  auto score = [&](const std::string& algo, const ParametricPolicy& policy) {
    const TabularPolicy table = policy.table();
    return HackRow{algo, avg_reward_score(policy, out.rm.model, eval_contexts, n_generations, gen_seed),
                   oracle_value(bench.env, table),
                   compute_metrics(scorer_for(table), bench.cases, settings).ndcg10};
  };

  for (Algorithm a : {Algorithm::kBc, Algorithm::kRsft, Algorithm::kExpRsft}) {
    const Outcome o = run_offline(bench, a);
    out.summary.push_back(score(o.algo, o.policy));
  }

  std::vector<Context> contexts;
  for (int s = 0; s < bench.env.catalog.n_contexts; ++s) contexts.push_back(Context{s, {}});
  auto curve_observer = [&](std::vector<HackCurvePoint>& curve) {
    return [&](int step, const ParametricPolicy& policy) {
      const HackRow r = score("", policy);
      curve.push_back({step, r.avg_rm_score, r.oracle_value, r.ndcg10});
    };
  };
  const ParametricPolicy ppo = run_ppo(bench.base, contexts, out.rm.model, ppo_config_from(config),
                                       curve_observer(out.ppo_curve));
  out.summary.push_back(score("ppo", ppo));
  const ParametricPolicy dpo = run_dpo(bench.base, contexts, out.rm.model, dpo_config_from(config),
                                       curve_observer(out.dpo_curve));
  out.summary.push_back(score("dpo", dpo));
  return out;
}

RmBaselineOutcome run_rm_baselines(const OfflineDataset& data, const RewardModelConfig& config) {
  auto [train_split, validation] = split_dataset(data, config.validation_fraction, config.seed);
  RmBaselineOutcome out;
  out.rm = train_reward_model(train_split, validation, config);
  out.rows = evaluate_predictors(validation, out.rm.model, NaivePredictors::fit(train_split));
  return out;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sweep_csv(const SweepOutcome& sweep) {
  std::ostringstream out;
  out << "lambda,best_oracle_value,best_ndcg10,best_ndcg50,best_hr10,best_hr50,best_mrr,"
         "final_oracle_value,final_ndcg10,final_ndcg50,final_hr10,final_hr50,final_mrr\n";
  auto cols = [&](const SweepMetrics& m) {
    out << ',' << fmt(m.oracle_value) << ',' << fmt(m.ndcg10) << ',' << fmt(m.ndcg50) << ','
        << fmt(m.hr10) << ',' << fmt(m.hr50) << ',' << fmt(m.mrr);
  };
  for (const auto& row : sweep.rows) {
    out << fmt(row.lambda);
    cols(row.best);
    cols(row.final);
    out << '\n';
  }
  return out.str();
}

std::string hack_summary_csv(const std::vector<HackRow>& rows) {
  std::ostringstream out;
  out << "algo,avg_rm_score,oracle_value,ndcg10\n";
  for (const auto& r : rows) {
    out << r.algo << ',' << fmt(r.avg_rm_score) << ',' << fmt(r.oracle_value) << ',' << fmt(r.ndcg10)
        << '\n';
  }
  return out.str();
}

std::string hack_curve_csv(const std::vector<HackCurvePoint>& curve) {
  std::ostringstream out;
  out << "step,avg_rm_score,oracle_value,ndcg10\n";
  for (const auto& p : curve) {
    out << p.step << ',' << fmt(p.avg_rm_score) << ',' << fmt(p.oracle_value) << ','
        << fmt(p.ndcg10) << '\n';
  }
  return out.str();
}

std::string predictors_csv(const std::vector<PredictorRow>& rows) {
  std::ostringstream out;
  out << "predictor,mse,mae,n\n";
  for (const auto& r : rows) {
    out << r.name << ',' << fmt(r.errors.mse) << ',' << fmt(r.errors.mae) << ',' << r.errors.n << '\n';
  }
  return out.str();
}

}  // namespace ersft
