#include "ersft/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "ersft/bounds.hpp"
#include "ersft/error.hpp"
#include "ersft/experiment.hpp"
#include "ersft/movielens.hpp"
#include "ersft/random.hpp"

namespace ersft {

namespace {

namespace fs = std::filesystem;

constexpr const char* kVersion = "ersft 1.0.0";

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<double> lambda;
  std::optional<std::string> algo;
  std::vector<double> grid;
  std::optional<int> epochs;
  std::optional<double> threshold;
  std::string input;
  std::string checkpoint;
  std::string which;
  int min_history = 1;
  int max_users = 0;
};

class Run {
 public:
  Run(std::string subcommand, Json config, Json overrides, fs::path out_dir)
      : subcommand_(std::move(subcommand)),
        config_(std::move(config)),
        overrides_(std::move(overrides)),
        out_(std::move(out_dir)) {}

  const Json& config() const { return config_; }
  const fs::path& dir() const { return out_; }

  void emit(const std::string& name, const std::string& text) {
    write_text(out_ / name, text);
    artifacts_.push_back(name);
  }
  // For files already written by a library call.
  void record(const std::string& name) { artifacts_.push_back(name); }
  void emit_json(const std::string& name, const Json& j) { emit(name, j.dump(2) + "\n"); }
  void note(const std::string& key, const Json& value) { extra_[key] = value; }

  void finish(const Json& args) {
    Json m;
    m["tool"] = kVersion;
    m["subcommand"] = subcommand_;
    m["args"] = args;
    m["overrides"] = overrides_;
    m["resolved_config"] = config_;
    m["artifacts"] = artifacts_;
    if (!extra_.is_null()) m["summary"] = extra_;
    write_text(out_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  std::string subcommand_;
  Json config_;
  Json overrides_;
  fs::path out_;
  std::vector<std::string> artifacts_;
  Json extra_;
};

// precedence: flags > config file > defaults. A manifest from an earlier run
// is accepted as a config file and replays its resolved config.
std::pair<Json, Json> resolve(const Flags& f) {
  Json user = Json::object();
  if (!f.config_path.empty()) {
    Json doc;
    try {
      doc = Json::parse(read_text(f.config_path));
    } catch (const Json::parse_error& e) {
      throw ParameterError("cannot parse config " + f.config_path + ": " + e.what());
    }
    user = doc.contains("resolved_config") ? doc.at("resolved_config") : doc;
  }
  Json overrides = Json::object();
  if (f.seed) overrides["seed"] = *f.seed;
  if (f.lambda) overrides["train"]["lambda"] = *f.lambda;
  if (f.algo) overrides["train"]["algorithm"] = *f.algo;
  if (!f.grid.empty()) overrides["sweep"]["grid"] = f.grid;
  if (f.epochs) overrides["train"]["epochs"] = *f.epochs;
  if (f.threshold) overrides["metrics"]["threshold"] = *f.threshold;
  Json resolved = resolve_config(user);
  resolved.merge_patch(overrides);
  if (!resolved["data"].contains("path")) resolved["data"]["path"] = nullptr;
  return {resolved, overrides};
}

std::string metrics_csv(const std::vector<std::pair<std::string, MetricsReport>>& rows, int epoch) {
  std::string text = std::string(kMetricsCsvHeader) + "\n";
  for (const auto& [algo, m] : rows) text += metrics_csv_row(algo, epoch, m) + "\n";
  return text;
}

bool has_data_path(const Json& config) { return !config.at("data").at("path").is_null(); }

struct RealData {
  OfflineDataset train;
  std::vector<TestCase> cases;
};

// A directory written by ingest-movielens or gen-data.
RealData load_real_data(const Json& config) {
  const fs::path dir = config.at("data").at("path").get<std::string>();
  RealData d;
  if (fs::exists(dir / "train.ndjson")) {
    d.train = read_dataset(dir / "train.ndjson", dir / "train_manifest.json");
  } else {
    d.train = read_dataset(dir / "data.ndjson", dir / "data_manifest.json");
  }
  if (fs::exists(dir / "test_cases.json")) {
    for (const auto& j : Json::parse(read_text(dir / "test_cases.json"))) {
      d.cases.push_back({j.at("context").get<int>(), j.at("history").get<std::vector<int>>(),
                         j.at("target").get<int>(), j.at("rating").get<double>()});
    }
  }
  return d;
}

void require_synthetic(const Json& config, const std::string& what) {
  if (has_data_path(config)) throw ParameterError(what + " needs a synthetic environment (unset data.path)");
}

void cmd_gen_env(Run& run) {
  const auto env = make_low_rank_env(env_spec_from(run.config()));
  run.emit_json("env.json", env_to_json(env));
}

void cmd_gen_data(Run& run) {
  const Json& c = run.config();
  const Benchmark b = build_benchmark(c, false);
  run.emit_json("env.json", env_to_json(b.env));
  write_dataset(b.data, run.dir() / "data.ndjson", run.dir() / "data_manifest.json",
                derive_seed(c.at("seed").get<std::uint64_t>(), "data"), b.env.noise);
  run.record("data.ndjson");
  run.record("data_manifest.json");
  run.note("n_records", b.data.size());
}

void cmd_ingest(Run& run, const Flags& f) {
  if (f.input.empty()) throw ParameterError("ingest-movielens needs --input PATH");
  MovieLensOptions opts;
  opts.min_history = f.min_history;
  opts.max_users = f.max_users;
  opts.rating_threshold = run.config().at("metrics").at("threshold").get<double>();
  const IngestResult r = ingest_movielens(fs::path(f.input), opts);
  write_dataset(r.train, run.dir() / "train.ndjson", run.dir() / "train_manifest.json", 0,
                NoiseModel::none(), Json{{"source", fs::path(f.input).filename().string()}});
  run.record("train.ndjson");
  run.record("train_manifest.json");
  Json cases = Json::array();
  for (const auto& t : r.test) {
    cases.push_back({{"context", t.context}, {"history", t.history}, {"target", t.target},
                     {"rating", t.target_rating}});
  }
  run.emit_json("test_cases.json", cases);
  run.emit_json("ids.json", {{"users", r.user_ids}, {"items", r.item_ids}});
  const auto& s = r.summary;
  const Json summary = {{"rows", s.rows},
                        {"users_seen", s.users_seen},
                        {"users_dropped_min_history", s.users_dropped_min_history},
                        {"users_kept", s.users_kept},
                        {"test_cases", s.test_cases},
                        {"test_cases_below_threshold", s.test_cases_below_threshold},
                        {"n_items", s.n_items}};
  run.emit_json("summary.json", summary);
  run.note("ingest", summary);
}

void save_policy(Run& run, const ParametricPolicy& policy, const std::string& algo) {
  save_checkpoint(policy, run.dir() / "policy.json", run.dir() / "policy.bin",
                  Json{{"algo", algo}, {"seed", run.config().at("seed")}});
  run.record("policy.json");
  run.record("policy.bin");
}

void cmd_train_real(Run& run, Algorithm algo) {
  const Json& c = run.config();
  const RealData d = load_real_data(c);
  const PolicyShape shape = policy_shape_from(c, d.train.catalog.n_contexts, d.train.catalog.n_actions);
  ParametricPolicy init(shape, derive_seed(c.at("seed").get<std::uint64_t>(), "train"));
  ParametricPolicy base = train(d.train, pretrain_config_from(c), std::move(init)).policy;
  const MetricSettings settings = metric_settings_from(c);
  EpochObserver observer;
  if (!d.cases.empty()) {
    observer = [&](const ParametricPolicy& p, EpochRecord& rec) {
      rec.metrics = compute_metrics(p, d.cases, settings);
    };
  }
  auto result = train(d.train, train_config_from(c, algo), std::move(base), observer);
  run.emit("trace.csv", result.trace.to_csv());
  if (!d.cases.empty()) {
    run.emit("metrics.csv", metrics_csv({{algorithm_name(algo), compute_metrics(result.policy, d.cases, settings)}},
                                        static_cast<int>(result.trace.records.size())));
  }
  save_policy(run, result.policy, algorithm_name(algo));
}

void cmd_train(Run& run) {
  const Json& c = run.config();
  std::string name = c.at("train").at("algorithm").get<std::string>();
  std::replace(name.begin(), name.end(), '-', '_');
  if (name == "ppo" || name == "dpo") {
    require_synthetic(c, name);
    const Benchmark bench = build_benchmark(c);
    const HackOutcome h = run_hack(bench);
    const auto& curve = name == "ppo" ? h.ppo_curve : h.dpo_curve;
    run.emit("curve.csv", hack_curve_csv(curve));
    for (const auto& row : h.summary) {
      if (row.algo == name) {
        run.note("final", {{"avg_rm_score", row.avg_rm_score}, {"oracle_value", row.oracle_value},
                           {"ndcg10", row.ndcg10}});
      }
    }
    run.note("hyperparameters", "ppo/dpo settings are this tool's own demo choices");
    return;
  }
  const Algorithm algo = parse_algorithm(name);
  if (has_data_path(c)) return cmd_train_real(run, algo);
  const Benchmark bench = build_benchmark(c);
  const Outcome o = run_offline(bench, algo);
  run.emit("trace.csv", o.trace.to_csv());
  run.emit("metrics.csv", metrics_csv({{o.algo, o.metrics}}, static_cast<int>(o.trace.records.size())));
  save_policy(run, o.policy, o.algo);
}

void cmd_sweep(Run& run) {
  require_synthetic(run.config(), "sweep-lambda");
  const Benchmark bench = build_benchmark(run.config());
  const auto grid = run.config().at("sweep").at("grid").get<std::vector<double>>();
  const SweepOutcome sweep = run_sweep(bench, grid);
  run.emit("sweep.csv", sweep_csv(sweep));
  std::vector<double> best_v, best_n, final_v, final_n;
  for (const auto& r : sweep.rows) {
    best_v.push_back(r.best.oracle_value);
    best_n.push_back(r.best.ndcg10);
    final_v.push_back(r.final.oracle_value);
    final_n.push_back(r.final.ndcg10);
  }
  auto peak = [&](const std::vector<double>& v) {
    const PeakInfo p = find_peak(v);
    return Json{{"argmax_lambda", grid[p.argmax]}, {"interior", p.interior}};
  };
  const Json summary = {{"bc_oracle_value", sweep.bc.oracle_value},
                        {"bc_ndcg10", sweep.bc.metrics.ndcg10},
                        {"peaks", {{"best_oracle_value", peak(best_v)}, {"best_ndcg10", peak(best_n)},
                                   {"final_oracle_value", peak(final_v)},
                                   {"final_ndcg10", peak(final_n)}}}};
  run.emit_json("sweep_summary.json", summary);
  run.note("sweep", summary);
}

Json bound_reports_json(const std::vector<BoundReport>& reports) {
  Json arr = Json::array();
  for (const auto& r : reports) arr.push_back(r.to_json());
  return arr;
}

void cmd_verify_bounds(Run& run, const std::string& which) {
  const Json& b = run.config().at("bounds");
  const auto seed = derive_seed(run.config().at("seed").get<std::uint64_t>(), "noise");
  const int threads = b.at("threads").get<int>();
  const bool all = which == "all";
  bool known = all;
  Json passed = Json::object();

  if (all || which == "prop1") {
    known = true;
    const Json& p = b.at("prop1");
    Prop1Config pc;
    pc.n_instances = p.at("n_instances").get<int>();
    pc.max_contexts = p.at("max_contexts").get<int>();
    pc.max_actions = p.at("max_actions").get<int>();
    pc.lambda_grid = p.at("lambda_grid").get<std::vector<double>>();
    pc.tolerance = p.at("tolerance").get<double>();
    pc.seed = derive_seed(seed, "prop1");
    const BoundReport r = check_prop1(pc);
    run.emit_json("prop1.json", r.to_json());
    passed["prop1"] = r.passed;
  }
  if (all || which == "thm1") {
    known = true;
    const Json& p = b.at("thm1");
    const auto env = random_bandit_env(p.at("n_contexts").get<int>(), p.at("n_actions").get<int>(),
                                       p.at("r_max").get<double>(), derive_seed(seed, "thm1_env"));
    std::vector<BoundReport> reports;
    for (double lambda : p.at("lambda_grid").get<std::vector<double>>()) {
      Thm1Config tc;
      tc.lambda = lambda;
      tc.sigma = p.at("sigma").get<double>();
      tc.delta = p.at("delta").get<double>();
      tc.n_trials = p.at("n_trials").get<int>();
      tc.confidence = p.at("confidence").get<double>();
      tc.uniform_over_states = p.at("uniform_over_states").get<bool>();
      tc.seed = derive_seed(seed, "thm1");
      tc.n_threads = threads;
      reports.push_back(check_thm1(env, tc));
    }
    bool same_gap = true, ok = true;
    for (const auto& r : reports) {
      same_gap = same_gap && r.claimed == reports.front().claimed;
      ok = ok && r.passed;
    }
    run.emit_json("thm1.json", {{"reports", bound_reports_json(reports)},
                                {"claimed_gap_lambda_independent", same_gap}});
    passed["thm1"] = ok && same_gap;
  }
  if (all || which == "thm2") {
    known = true;
    const Json& p = b.at("thm2");
    std::vector<BoundReport> reports;
    bool ok = true;
    for (double eps : p.at("epsilon_grid").get<std::vector<double>>()) {
      const auto env = random_bandit_env(p.at("n_contexts").get<int>(), p.at("n_actions").get<int>(),
                                         p.at("r_max").get<double>(), derive_seed(seed, "thm2_env"),
                                         NoiseModel::bounded_uniform(eps));
      for (double lambda : p.at("lambda_grid").get<std::vector<double>>()) {
        Thm2Config tc;
        tc.lambda = lambda;
        tc.n_trials = p.at("n_trials").get<int>();
        tc.tolerance = p.at("tolerance").get<double>();
        tc.seed = derive_seed(seed, "thm2");
        tc.n_threads = threads;
        reports.push_back(check_thm2(env, tc));
        ok = ok && reports.back().passed;
      }
    }
    run.emit_json("thm2.json", {{"reports", bound_reports_json(reports)}});
    passed["thm2"] = ok;
  }
  if (all || which == "min-lambda") {
    known = true;
    const Json& p = b.at("min_lambda");
    const double sigma = p.at("sigma").get<double>();
    const int n_actions = p.at("n_actions").get<int>();
    const double delta = p.at("delta").get<double>();
    const double tau = p.at("tau").get<double>();
    const double r_max = p.at("r_max").get<double>();
    const double eps = epsilon_of(sigma, n_actions, delta);
    const double lambda = min_safe_lambda(sigma, n_actions, delta, tau, r_max);
    const Json j = {{"params", p},
                    {"epsilon", eps},
                    {"lambda", lambda},
                    {"recovered_tau", lambda > 0 ? value_slack(eps, lambda, r_max) : 0.0}};
    run.emit_json("min_lambda.json", j);
  }
  if (!known) throw ParameterError("verify-bounds expects prop1, thm1, thm2, min-lambda or all");
  run.note("passed", passed);
}

void cmd_eval(Run& run, const Flags& f) {
  if (f.checkpoint.empty()) throw ParameterError("eval needs --checkpoint DIR");
  // Accept the checkpoint directory or either of its files.
  fs::path dir = f.checkpoint;
  if (fs::is_regular_file(dir)) dir = dir.parent_path();
  const ParametricPolicy policy = load_checkpoint(dir / "policy.json", dir / "policy.bin");
  const Json& c = run.config();
  const MetricSettings settings = metric_settings_from(c);
  if (has_data_path(c)) {
    const RealData d = load_real_data(c);
    run.emit("metrics.csv", metrics_csv({{"checkpoint", compute_metrics(policy, d.cases, settings)}}, 0));
    return;
  }
  const Benchmark bench = build_benchmark(c, false);
  const TabularPolicy table = policy.table();
  if (table.n_contexts() != bench.env.catalog.n_contexts ||
      table.n_actions() != bench.env.catalog.n_actions) {
    throw ParameterError("checkpoint does not match the configured environment");
  }
  MetricsReport m = compute_metrics(scorer_for(table), bench.cases, settings);
  m.oracle_value = oracle_value(bench.env, table);
  run.emit("metrics.csv", metrics_csv({{"checkpoint", m}}, 0));
}

Json fit_json(const FitReport& r) {
  auto e = [](const ErrorStats& s) { return Json{{"mse", s.mse}, {"mae", s.mae}, {"n", s.n}}; };
  return {{"train", e(r.train)}, {"validation", e(r.validation)}};
}

void cmd_rm_baselines(Run& run) {
  const Json& c = run.config();
  const OfflineDataset data = has_data_path(c) ? load_real_data(c).train : build_benchmark(c, false).data;
  const RmBaselineOutcome o = run_rm_baselines(data, reward_model_config_from(c, data.catalog.n_contexts));
  run.emit("rm_baselines.csv", predictors_csv(o.rows));
  run.emit_json("rm_fit.json", fit_json(o.rm.report));
}

void cmd_hack_demo(Run& run) {
  require_synthetic(run.config(), "hack-demo");
  const Benchmark bench = build_benchmark(run.config());
  const HackOutcome h = run_hack(bench);
  run.emit("hack_summary.csv", hack_summary_csv(h.summary));
  run.emit("hack_ppo.csv", hack_curve_csv(h.ppo_curve));
  run.emit("hack_dpo.csv", hack_curve_csv(h.dpo_curve));
  run.emit("rm_baselines.csv", predictors_csv(h.predictors));
  run.emit_json("rm_fit.json", fit_json(h.rm.report));
  run.note("hyperparameters", "ppo/dpo settings are this tool's own demo choices");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exponentially weighted fine-tuning toolkit", "ersft"};
  app.require_subcommand(1, 1);
  Flags f;
  auto add_common = [&f](CLI::App* sub) {
    sub->add_option("--config", f.config_path, "JSON config file (or a previous manifest)");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--lambda", f.lambda, "exp_rsft temperature");
    sub->add_option("--algo", f.algo, "bc, rsft, exp-rsft, ppo or dpo");
    sub->add_option("--grid", f.grid, "comma-separated lambda grid")->delimiter(',');
    sub->add_option("--epochs", f.epochs, "training epochs");
    sub->add_option("--threshold", f.threshold, "rating threshold for test cases");
  };
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen-env", "write a synthetic environment"},
      {"gen-data", "write a logged dataset from the synthetic environment"},
      {"ingest-movielens", "convert a ratings file into a training set and test cases"},
      {"train", "train one algorithm"},
      {"sweep-lambda", "exp_rsft over a temperature grid"},
      {"verify-bounds", "check the improvement and robustness bounds"},
      {"eval", "evaluate a checkpoint"},
      {"rm-baselines", "reward model vs naive predictors"},
      {"hack-demo", "reward model exploitation by PPO and DPO"}};
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub);
    subs[name] = sub;
  }
  subs["ingest-movielens"]->add_option("--input", f.input, "ratings file")->required();
  subs["ingest-movielens"]->add_option("--min-history", f.min_history, "minimum interactions per user");
  subs["ingest-movielens"]->add_option("--max-users", f.max_users, "keep at most this many users (0 = all)");
  subs["eval"]->add_option("--checkpoint", f.checkpoint, "directory with policy.json and policy.bin (or one of those files)")->required();
  subs["verify-bounds"]->add_option("which", f.which, "prop1, thm1, thm2, min-lambda or all")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitValidation;
  }

  std::string subcommand = app.get_subcommands().front()->get_name();
  try {
    auto [config, overrides] = resolve(f);
    const fs::path out_dir = f.out.empty() ? fs::path("runs") / subcommand : fs::path(f.out);
    Run run(subcommand, config, overrides, out_dir);
    Json args_json = Json::object();
    if (subcommand == "verify-bounds") {
      args_json["which"] = f.which;
      cmd_verify_bounds(run, f.which);
    } else if (subcommand == "gen-env") {
      cmd_gen_env(run);
    } else if (subcommand == "gen-data") {
      cmd_gen_data(run);
    } else if (subcommand == "ingest-movielens") {
      args_json = {{"input", f.input}, {"min_history", f.min_history}, {"max_users", f.max_users}};
      cmd_ingest(run, f);
    } else if (subcommand == "train") {
      cmd_train(run);
    } else if (subcommand == "sweep-lambda") {
      cmd_sweep(run);
    } else if (subcommand == "eval") {
      args_json["checkpoint"] = f.checkpoint;
      cmd_eval(run, f);
    } else if (subcommand == "rm-baselines") {
      cmd_rm_baselines(run);
    } else if (subcommand == "hack-demo") {
      cmd_hack_demo(run);
    }
    run.finish(args_json);
    out << "wrote " << (out_dir / "manifest.json").string() << "\n";
    return kExitOk;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const SupportError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const EmptySetError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Json::exception& e) {
    err << "error: invalid config value: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace ersft
