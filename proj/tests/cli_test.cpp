#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "countvqa/jsonl.hpp"
#include "countvqa/model_adapter.hpp"
#include "support/test_support.hpp"

namespace countvqa {
namespace {

namespace fs = std::filesystem;

const fs::path kFixtures = COUNTVQA_FIXTURE_DIR;
const std::string kAllFamilies = "primal,binary_I,binary_II,binary_III,compare_I,compare_II";

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(COUNTVQA_CLI) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Full pipeline on the bundled fixture with one adapter. Returns the run dir.
fs::path pipeline(const testing::TempDir& dir, const std::string& name, const std::string& adapter_args) {
  const auto d = dir / name;
  const auto log = dir / (name + ".log");
  const auto q = [&](const std::string& f) { return (d / f).string(); };
  EXPECT_EQ(run_cli("build-dataset --annotations " + (kFixtures / "pipeline_instances.json").string() +
                        " --seed 3 --out-dir " + d.string(),
                    log),
            0)
      << read_file(log);
  EXPECT_EQ(run_cli("gen-questions --dataset " + q("dataset.jsonl") + " --families primal --out " + q("primal.jsonl"), log),
            0);
  EXPECT_EQ(run_cli("run-eval --questions " + q("primal.jsonl") + " " + adapter_args + " --out-dir " + q("primal_run"),
                    log),
            0)
      << read_file(log);
  EXPECT_EQ(run_cli("gen-questions --dataset " + q("dataset.jsonl") + " --families " + kAllFamilies + " --seed 5" +
                        " --primal-responses " + q("primal_run/responses.jsonl") + " --out " + q("questions.jsonl"),
                    log),
            0)
      << read_file(log);
  EXPECT_EQ(run_cli("run-eval --questions " + q("questions.jsonl") + " " + adapter_args + " --out-dir " + q("run"), log), 0)
      << read_file(log);
  EXPECT_EQ(run_cli("analyze --questions " + q("questions.jsonl") + " --responses " + q("run/responses.jsonl") +
                        " --model " + name + " --out-dir " + q("report"),
                    log),
            0)
      << read_file(log);
  return d;
}

bool has_temp_files(const fs::path& root) {
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.path().string().find(".tmp") != std::string::npos) return true;
  }
  return false;
}

TEST(Cli, OraclePipelineScoresPerfectly) {
  testing::TempDir dir;
  const auto d = pipeline(dir, "oracle", "--adapter oracle");
  const auto report = parse_json_text(read_file(d / "report/eval_report.json"), "report");
  const auto& fam = report["families"];
  for (const auto& f : {"primal", "binary_I", "binary_II", "binary_III", "compare_I", "compare_II"}) {
    ASSERT_TRUE(fam.contains(f)) << f;
    EXPECT_EQ(fam[f]["accuracy"], 1.0) << f;
    EXPECT_EQ(fam[f]["n_unparseable"], 0) << f;
  }
  EXPECT_EQ(fam["primal"]["macro_f1"], 1.0);
  EXPECT_EQ(fam["primal"]["mae"], 0.0);
  const auto cons = parse_json_text(read_file(d / "report/consistency_report.json"), "consistency");
  EXPECT_EQ(cons["binary_outer_inconsistency"]["rate"], 0.0);
  EXPECT_EQ(cons["binary_inner_inconsistency"]["defined"], false);
  EXPECT_EQ(cons["compare_inner_inconsistency"]["I"]["rate"], 0.0);
  EXPECT_EQ(cons["compare_outer_consistency"]["pooled"]["rate"], 1.0);
  EXPECT_EQ(read_file(d / "report/counting.csv"), "model,macro_f1,weighted_f1,mae\noracle,1.000,1.000,0.000\n");
  EXPECT_TRUE(fs::exists(d / "report/report.md"));
  EXPECT_TRUE(fs::exists(d / "dataset.manifest.json"));
  EXPECT_TRUE(fs::exists(d / "questions.jsonl.manifest.json"));
  EXPECT_TRUE(fs::exists(d / "run/run.manifest.json"));
  EXPECT_FALSE(has_temp_files(d));
}

TEST(Cli, ReplayReproducesReportsByteForByte) {
  testing::TempDir dir;
  const auto a = pipeline(dir, "random", "--adapter random --seed 9");
  const auto log = dir / "replay.log";
  const auto q = (a / "questions.jsonl").string();
  ASSERT_EQ(run_cli("run-eval --questions " + q + " --adapter replay --replay-log " + (a / "run/run_log.jsonl").string() +
                        " --out-dir " + (dir / "replay").string(),
                    log),
            0)
      << read_file(log);
  ASSERT_EQ(run_cli("analyze --questions " + q + " --responses " + (dir / "replay/responses.jsonl").string() +
                        " --model random --out-dir " + (dir / "replay_report").string(),
                    log),
            0);
  for (const auto& f : {"eval_report.json", "consistency_report.json", "families.csv", "counting.csv", "report.md"}) {
    EXPECT_EQ(read_file(a / "report" / f), read_file(dir / "replay_report" / f)) << f;
  }
}

TEST(Cli, MaxQueriesResumes) {
  testing::TempDir dir;
  const auto d = pipeline(dir, "ref", "--adapter random --seed 4");
  const auto q = (d / "questions.jsonl").string();
  const auto log = dir / "resume.log";
  const auto out = (dir / "resumed").string();
  ASSERT_EQ(run_cli("run-eval --questions " + q + " --adapter random --seed 4 --max-queries 20 --out-dir " + out, log), 0);
  EXPECT_EQ(read_responses(dir / "resumed/responses.jsonl").size(), 20u);
  ASSERT_EQ(run_cli("run-eval --questions " + q + " --adapter random --seed 4 --out-dir " + out, log), 0);
  EXPECT_NE(read_file(log).find("20 resumed"), std::string::npos) << read_file(log);
  EXPECT_EQ(read_file(dir / "resumed/responses.jsonl"), read_file(d / "run/responses.jsonl"));
}

TEST(Cli, ExitCodes) {
  testing::TempDir dir;
  const auto log = dir / "x.log";
  EXPECT_EQ(run_cli("", log), 1);
  EXPECT_EQ(run_cli("no-such-command", log), 1);
  EXPECT_EQ(run_cli("build-dataset --out-dir " + (dir / "o").string(), log), 1);  // missing --annotations
  EXPECT_EQ(run_cli("build-dataset --annotations " + (kFixtures / "mini_instances.json").string() + " --k 0 --out-dir " +
                        (dir / "o").string(),
                    log),
            1);

  // A questions file passed where responses are expected: schema mismatch.
  ASSERT_EQ(run_cli("build-dataset --annotations " + (kFixtures / "mini_instances.json").string() + " --out-dir " +
                        (dir / "m").string(),
                    log),
            0);
  const auto ds = (dir / "m/dataset.jsonl").string();
  const auto qs = (dir / "m/q.jsonl").string();
  ASSERT_EQ(run_cli("gen-questions --dataset " + ds + " --out " + qs, log), 0);
  EXPECT_EQ(run_cli("analyze --questions " + qs + " --responses " + qs + " --out-dir " + (dir / "r").string(), log), 2);
  EXPECT_NE(read_file(log).find("schema"), std::string::npos) << read_file(log);
  EXPECT_EQ(run_cli("gen-questions --dataset " + ds + " --families binary_II --out " + qs, log), 1);
  EXPECT_EQ(run_cli("run-eval --questions " + qs + " --adapter replay --replay-log " + ds + " --out-dir " +
                        (dir / "rr").string(),
                    log),
            2);

  // Nothing listens on port 1: retries run out and the run fails with a transport error.
  write_json_atomic(dir / "endpoint.json", json{{"base_url", "http://127.0.0.1:1/v1"},
                                                {"model_name", "m"},
                                                {"image_transport", "url"},
                                                {"max_retries", 0},
                                                {"timeout", 1}});
  EXPECT_EQ(run_cli("run-eval --questions " + qs + " --adapter http --endpoint " + (dir / "endpoint.json").string() +
                        " --out-dir " + (dir / "h").string(),
                    log),
            3)
      << read_file(log);
  EXPECT_FALSE(has_temp_files(dir.path()));
}

TEST(Cli, TrainDataAndHoldout) {
  testing::TempDir dir;
  const auto log = dir / "t.log";
  const auto ann = (kFixtures / "pipeline_instances.json").string();
  ASSERT_EQ(run_cli("gen-train-data --annotations " + ann + " --method cons_I_II --target-count 10 --seed 1 --out " +
                        (dir / "t.jsonl").string(),
                    log),
            0)
      << read_file(log);
  const auto manifest = parse_json_text(read_file(dir / "t.jsonl.manifest.json"), "manifest");
  EXPECT_EQ(manifest["counts_by_method"]["cons_II"], 10);
  EXPECT_EQ(manifest["count"], manifest["counts_by_method"]["cons_I"].get<int>() + 10);

  const auto first = parse_json_text(read_file(dir / "t.jsonl").substr(0, read_file(dir / "t.jsonl").find('\n')), "t");
  write_text_atomic(dir / "holdout.txt", first["image"].get<std::string>() + "\n");
  EXPECT_EQ(run_cli("gen-train-data --annotations " + ann + " --holdout " + (dir / "holdout.txt").string() + " --out " +
                        (dir / "leak.jsonl").string(),
                    log),
            2);
  EXPECT_FALSE(fs::exists(dir / "leak.jsonl"));
}

TEST(Cli, ConfigFileSuppliesFlags) {
  testing::TempDir dir;
  const auto log = dir / "c.log";
  write_text_atomic(dir / "cfg.toml", "[build-dataset]\nk = 1\nseed = 2\n");
  ASSERT_EQ(run_cli("--config " + (dir / "cfg.toml").string() + " build-dataset --annotations " +
                        (kFixtures / "pipeline_instances.json").string() + " --out-dir " + (dir / "o").string(),
                    log),
            0)
      << read_file(log);
  const auto m = parse_json_text(read_file(dir / "o/dataset.manifest.json"), "manifest");
  EXPECT_EQ(m["sampling"]["k"], 1);
  EXPECT_EQ(m["sampling"]["seed"], 2);
}

}  // namespace
}  // namespace countvqa
