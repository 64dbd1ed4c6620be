#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "ersft/cli.hpp"
#include "ersft/dataset_io.hpp"

using namespace ersft;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ersft_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write_text(dir_ / "small.json", R"({
      "env": {"n_contexts": 8, "n_actions": 15},
      "data": {"n_samples": 1500},
      "pretrain": {"epochs": 3},
      "train": {"epochs": 3},
      "sweep": {"grid": [0.1, 1.0]},
      "metrics": {"n_test_draws": 2000, "avg_reward_contexts": 100},
      "reward_model": {"epochs": 3},
      "ppo": {"steps": 3},
      "dpo": {"steps": 3},
      "bounds": {"prop1": {"n_instances": 40}, "thm1": {"n_trials": 300, "n_actions": 50},
                 "thm2": {"n_trials": 50}}
    })");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string cfg() const { return (dir_ / "small.json").string(); }
  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, RerunsAreByteIdentical) {
  const auto out = (dir_ / "data").string();
  ASSERT_EQ(run({"gen-data", "--config", cfg(), "--out", out}).code, kExitOk);
  const auto data = read_text(dir_ / "data" / "data.ndjson");
  const auto manifest = read_text(dir_ / "data" / "manifest.json");
  ASSERT_EQ(run({"gen-data", "--config", cfg(), "--out", out}).code, kExitOk);
  EXPECT_EQ(read_text(dir_ / "data" / "data.ndjson"), data);
  EXPECT_EQ(read_text(dir_ / "data" / "manifest.json"), manifest);

  ASSERT_EQ(run({"gen-data", "--config", cfg(), "--out", out, "--seed", "8"}).code, kExitOk);
  EXPECT_NE(read_text(dir_ / "data" / "data.ndjson"), data);
}

TEST_F(CliTest, TrainThenEvalFromCheckpoint) {
  const auto out = (dir_ / "train").string();
  const auto r = run({"train", "--config", cfg(), "--out", out, "--algo", "exp-rsft", "--lambda", "0.5"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* f : {"trace.csv", "metrics.csv", "policy.json", "policy.bin", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "train" / f)) << f;
  }
  const auto e = run({"eval", "--config", cfg(), "--out", (dir_ / "eval").string(), "--checkpoint",
                      (dir_ / "train" / "policy.json").string()});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_TRUE(fs::exists(dir_ / "eval" / "metrics.csv"));
}

TEST_F(CliTest, VerifyProp1HasNoViolations) {
  const auto r = run({"verify-bounds", "prop1", "--config", cfg(), "--out", dir_.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto report = Json::parse(read_text(dir_ / "prop1.json"));
  EXPECT_EQ(report["violations"].get<int>(), 0);
  EXPECT_TRUE(report["passed"].get<bool>());
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({"--help"}).code, kExitOk);
  EXPECT_EQ(run({}).code, kExitValidation);
  EXPECT_EQ(run({"no-such-command"}).code, kExitValidation);
  EXPECT_EQ(run({"gen-env", "--bogus"}).code, kExitValidation);
  EXPECT_EQ(run({"train", "--config", cfg(), "--out", dir_.string(), "--lambda", "-1"}).code,
            kExitValidation);
  EXPECT_EQ(run({"eval", "--config", cfg(), "--out", dir_.string()}).code, kExitValidation);
  EXPECT_EQ(run({"ingest-movielens", "--input", (dir_ / "missing.dat").string(), "--out",
                 dir_.string()})
                .code,
            kExitRuntime);

  write_text(dir_ / "bad.json", R"({"env": {"n_contexts": 8, "colour": 1}})");
  const auto bad = run({"gen-env", "--config", (dir_ / "bad.json").string(), "--out", dir_.string()});
  EXPECT_EQ(bad.code, kExitValidation);
  EXPECT_NE(bad.err.find("colour"), std::string::npos);
}

TEST_F(CliTest, IngestFixture) {
  const auto r = run({"ingest-movielens", "--input", (fs::path(ERSFT_TEST_DATA_DIR) / "ratings_small.dat").string(),
                      "--out", dir_.string(), "--threshold", "4.5"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto summary = Json::parse(read_text(dir_ / "summary.json"));
  EXPECT_EQ(summary["test_cases"].get<int>(), 2);
}
