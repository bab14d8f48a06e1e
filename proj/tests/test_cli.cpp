#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "benim/cli.hpp"

using namespace benim;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "benim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root = fs::temp_directory_path() /
           ("benim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  void TearDown() override { fs::remove_all(root); }

  std::string write_config(const std::string& name, const json& j) {
    const fs::path p = root / name;
    std::ofstream(p) << j.dump(2);
    return p.string();
  }

  json base() const {
    json j = {{"format_version", 1},
              {"seed", 5},
              {"generator", {{"preset", "2c5f"}}},
              {"forest", {{"n_trees", 5}, {"max_depth", 4}}},
              {"explainer", {{"n_points", 15}, {"local_epochs", 5}, {"subnet", {{"hidden_layers", {4}}}}}}};
    return j;
  }

  // generate then train, returning a config pointing at both artifacts
  json prepared() {
    const std::string cfg = write_config("gen.json", base());
    EXPECT_EQ(run({"generate", "--config", cfg, "--out", (root / "data").string()}).code, 0);
    json j = base();
    j["inputs"] = {{"dataset", (root / "data" / "dataset.csv").string()}};
    const std::string tcfg = write_config("train.json", j);
    EXPECT_EQ(run({"train-blackbox", "--config", tcfg, "--out", (root / "model").string()}).code, 0);
    j["inputs"]["model"] = (root / "model" / "model.json").string();
    j["inputs"]["ground_truth"] = (root / "data" / "ground_truth.json").string();
    j["explain"] = {{"anchor_rows", {0, 250}}};
    return j;
  }

  fs::path root;
};

json load(const fs::path& p) { return json::parse(read_text_file(p)); }

}  // namespace

TEST_F(CliTest, PipelineProducesSchemaValidArtifacts) {
  json j = prepared();
  EXPECT_TRUE(schema_validator("ground_truth").errors(load(root / "data" / "ground_truth.json")).empty());
  EXPECT_TRUE(schema_validator("rsf_model").errors(load(root / "model" / "model.json")).empty());

  const std::string ecfg = write_config("explain.json", j);
  auto r = run({"explain", "--config", ecfg, "--method", "survbenim-local", "--workers", "2", "--out",
                (root / "expl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"explanation_000.json", "explanation_001.json"}) {
    const json e = load(root / "expl" / f);
    EXPECT_TRUE(schema_validator("explanation").errors(e).empty()) << f;
    EXPECT_EQ(e["format_version"], 1);
  }
  EXPECT_EQ(load(root / "expl" / "explanation_001.json")["anchor_row"], 250);

  j["inputs"]["explanations"] = {(root / "expl" / "explanation_000.json").string(),
                                 (root / "expl" / "explanation_001.json").string()};
  const std::string vcfg = write_config("eval.json", j);
  r = run({"evaluate", "--config", vcfg, "--out", (root / "eval").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json report = load(root / "eval" / "report.json");
  EXPECT_TRUE(schema_validator("metrics_report").errors(report).empty());
  EXPECT_TRUE(fs::exists(root / "eval" / "report.csv"));
  EXPECT_TRUE(fs::exists(root / "eval" / "per_instance.csv"));

  r = run({"export-curves", "--config", vcfg, "--out", (root / "curves").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string curves = read_text_file(root / "curves" / "curves_explanation_000.csv");
  EXPECT_EQ(curves.substr(0, curves.find('\n')), "feature,grid_value,function_value");
}

TEST_F(CliTest, ExperimentModeWritesReports) {
  json j = base();
  j["experiment"] = {{"methods", {"survlime", "survbex"}}, {"test_points", 3}};
  const std::string cfg = write_config("exp.json", j);
  auto r = run({"evaluate", "--config", cfg, "--out", (root / "exp").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json report = load(root / "exp" / "report.json");
  EXPECT_TRUE(schema_validator("metrics_report").errors(report).empty());
}

TEST_F(CliTest, UnknownMethodExitsTwoAndListsMethods) {
  json j = prepared();
  const std::string cfg = write_config("explain.json", j);
  auto r = run({"explain", "--config", cfg, "--method", "shap", "--out", (root / "x").string()});
  EXPECT_EQ(r.code, 2);
  for (const auto& m : method_names()) EXPECT_NE(r.err.find(m), std::string::npos) << m;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
  EXPECT_NO_THROW((void)json::parse(r.err));
  EXPECT_FALSE(fs::exists(root / "x" / "explanation_000.json"));

  json e = base();
  e["experiment"] = {{"methods", {"survlime", "nope"}}};
  r = run({"evaluate", "--config", write_config("exp.json", e), "--out", (root / "y").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("survbenim-global"), std::string::npos);
}

TEST_F(CliTest, SameSeedGivesByteIdenticalOutputs) {
  json j = prepared();
  const std::string cfg = write_config("explain.json", j);
  for (const char* m : {"survbenim-local", "survbenim-global", "survbex", "survlime", "survnam"}) {
    ASSERT_EQ(run({"explain", "--config", cfg, "--method", m, "--workers", "1", "--out",
                   (root / "a").string()}).code, 0);
    ASSERT_EQ(run({"explain", "--config", cfg, "--method", m, "--workers", "3", "--out",
                   (root / "b").string()}).code, 0);
    for (const char* f : {"explanation_000.json", "explanation_001.json"})
      EXPECT_EQ(read_text_file(root / "a" / f), read_text_file(root / "b" / f)) << m << " " << f;
  }
  // --seed overrides the config and changes the output
  ASSERT_EQ(run({"explain", "--config", cfg, "--method", "survbex", "--seed", "6", "--out",
                 (root / "c").string()}).code, 0);
  EXPECT_NE(read_text_file(root / "a" / "explanation_000.json"),
            read_text_file(root / "c" / "explanation_000.json"));
}

TEST_F(CliTest, FailureRemovesPartialOutputs) {
  json j = prepared();
  const std::string ecfg = write_config("e.json", j);
  ASSERT_EQ(run({"explain", "--config", ecfg, "--method", "survbenim-local", "--out",
                 (root / "benim").string()}).code, 0);
  ASSERT_EQ(run({"explain", "--config", ecfg, "--method", "survlime", "--out",
                 (root / "lime").string()}).code, 0);
  // The first curve file is written before the coefficient-only explanation fails.
  j["inputs"]["explanations"] = {(root / "benim" / "explanation_000.json").string(),
                                 (root / "lime" / "explanation_000.json").string()};
  const std::string ccfg = write_config("c.json", j);
  auto r = run({"export-curves", "--config", ccfg, "--out", (root / "curves").string()});
  EXPECT_EQ(r.code, 2) << r.err;
  EXPECT_NE(r.err.find("no feature curves"), std::string::npos);
  EXPECT_FALSE(fs::exists(root / "curves"));

  // Pre-existing files in the output directory survive a failed run.
  fs::create_directories(root / "keep");
  std::ofstream(root / "keep" / "note.txt") << "x";
  r = run({"export-curves", "--config", ccfg, "--out", (root / "keep").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(fs::exists(root / "keep" / "note.txt"));
  EXPECT_FALSE(fs::exists(root / "keep" / "curves_explanation_000.csv"));
}

TEST_F(CliTest, ErrorsAreSingleJsonLines) {
  auto r = run({"explain", "--config", (root / "absent.json").string()});
  EXPECT_EQ(r.code, 2);
  const json e = json::parse(r.err);
  EXPECT_TRUE(e.contains("error"));
  EXPECT_TRUE(e.contains("code"));

  r = run({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NO_THROW((void)json::parse(r.err));

  const std::string cfg = write_config("bad.json", json{{"format_version", 1}, {"sed", 1}});
  r = run({"generate", "--config", cfg, "--out", (root / "g").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("sed"), std::string::npos);
  EXPECT_FALSE(fs::exists(root / "g"));

  r = run({"generate", "--config", cfg, "--workers", "0"});
  EXPECT_EQ(r.code, 2);
}

TEST_F(CliTest, SchemasCommandMatchesPublishedFiles) {
  ASSERT_EQ(run({"schemas", "--out", (root / "s").string()}).code, 0);
  for (const auto& [name, s] : schemas()) {
    const std::string file = name + ".schema.json";
    EXPECT_EQ(read_text_file(root / "s" / file),
              read_text_file(fs::path(BENIM_SOURCE_DIR) / "schemas" / file));
  }
}

TEST_F(CliTest, BinaryReportsExitCodes) {
  const std::string bin = BENIM_CLI_PATH;
  const std::string err = (root / "err.txt").string();
  int status = std::system((bin + " frobnicate 2> " + err).c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 2);
  EXPECT_NO_THROW((void)json::parse(read_text_file(err)));
  status = std::system((bin + " schemas --out " + (root / "s").string()).c_str());
  EXPECT_EQ(WEXITSTATUS(status), 0);
}
