#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <map>

#include "hulirag/error.hpp"
#include "hulirag/jsonl.hpp"
#include "hulirag/pipeline.hpp"
#include "temp_dir.hpp"

using namespace hulirag;
namespace fs = std::filesystem;

namespace {

fs::path copy_fixtures(const testutil::TempDir& dir) {
  for (const auto& e : fs::directory_iterator(HULIRAG_FIXTURE_DIR)) {
    fs::copy_file(e.path(), dir.path() / e.path().filename());
  }
  return dir.path() / "config.json";
}

std::map<std::string, std::string> artifacts_of(const fs::path& out_dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(out_dir)) {
    if (e.path().filename() == artifacts::kManifest) continue;
    files[e.path().filename().string()] = testutil::read_text(e.path());
  }
  return files;
}

std::string stage_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const StageError& e) {
    return e.stage();
  }
  ADD_FAILURE() << "no StageError thrown";
  return "";
}

struct CliResult {
  int status = 0;
  std::string out;
  std::string err;
};

CliResult cli(const testutil::TempDir& dir, const std::string& args) {
  const auto out = dir.file("cli.out");
  const auto err = dir.file("cli.err");
  const std::string cmd = std::string("\"") + HULIRAG_CLI_PATH + "\" " + args + " >\"" + out + "\" 2>\"" + err + "\"";
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, testutil::read_text(out), testutil::read_text(err)};
}

}  // namespace

TEST(Pipeline, FixtureRunProducesEveryArtifact) {
  testutil::TempDir dir;
  const auto config = load_pipeline_config(copy_fixtures(dir));
  EXPECT_EQ(config.output_dir, dir.path() / "out");
  const auto report = run_pipeline(config);
  for (const char* name : {artifacts::kShortlist, artifacts::kPhrases, artifacts::kLocalScores, artifacts::kParams,
                           artifacts::kCalibrationExamples, artifacts::kReranked, artifacts::kTopN,
                           artifacts::kReport, artifacts::kManifest}) {
    EXPECT_TRUE(fs::exists(config.output_dir / name)) << name;
  }
  EXPECT_EQ(report.num_queries, 4u);
  ASSERT_EQ(report.recall_at.size(), 3u);
  EXPECT_DOUBLE_EQ(report.recall_at.at(5), 1.0);
  EXPECT_LE(report.recall_at.at(1), report.recall_at.at(2));
  ASSERT_TRUE(report.em.has_value());

  const auto manifest = jsonl::read_document((config.output_dir / artifacts::kManifest).string());
  EXPECT_EQ(manifest["seed"], 42);
  EXPECT_EQ(manifest["stage_seeds"]["calibrate"].get<std::uint64_t>(), stage_seed(42, "calibrate"));
  const auto params = jsonl::read_document((config.output_dir / artifacts::kParams).string());
  EXPECT_EQ(params["source"], "calibrated");

  const auto top = read_ranked_lists((config.output_dir / artifacts::kTopN).string());
  for (const auto& t : top) EXPECT_LE(t.entries.size(), 2u);
}

TEST(Pipeline, RunsAreByteIdentical) {
  testutil::TempDir a, b;
  auto ca = load_pipeline_config(copy_fixtures(a));
  auto cb = load_pipeline_config(copy_fixtures(b));
  run_pipeline(ca);
  run_pipeline(cb);
  const auto fa = artifacts_of(ca.output_dir);
  const auto fb = artifacts_of(cb.output_dir);
  ASSERT_FALSE(fa.empty());
  EXPECT_EQ(fa, fb);

  cb.workers = 1;
  run_pipeline(cb);
  EXPECT_EQ(artifacts_of(cb.output_dir), fa);
}

TEST(Pipeline, StagesRerunInIsolation) {
  testutil::TempDir dir;
  const auto config = load_pipeline_config(copy_fixtures(dir));
  run_pipeline(config);
  const auto baseline = artifacts_of(config.output_dir);

  const std::map<std::string, std::vector<std::string>> produced = {
      {"retrieve", {artifacts::kShortlist, artifacts::kCalibShortlist}},
      {"decompose", {artifacts::kPhrases, artifacts::kCalibPhrases}},
      {"score-local", {artifacts::kLocalScores, artifacts::kCalibLocalScores}},
      {"calibrate", {artifacts::kParams, artifacts::kCalibrationExamples}},
      {"rerank", {artifacts::kReranked, artifacts::kTopN}},
      {"evaluate", {artifacts::kReport}},
  };
  for (auto stage : kStages) {
    bool downstream = false;
    for (auto s : kStages) {
      if (s == stage) downstream = true;
      if (!downstream) continue;
      for (const auto& f : produced.at(std::string(s))) fs::remove(config.output_dir / f);
    }
    run_pipeline(config, stage);
    EXPECT_EQ(artifacts_of(config.output_dir), baseline) << stage;
  }
}

TEST(Pipeline, MissingUpstreamArtifactNamesTheStage) {
  testutil::TempDir dir;
  const auto config = load_pipeline_config(copy_fixtures(dir));
  run_pipeline(config);
  fs::remove(config.output_dir / artifacts::kShortlist);
  EXPECT_EQ(stage_of([&] { run_pipeline(config, "score-local"); }), "score-local");
  fs::remove(config.output_dir / artifacts::kLocalScores);
  EXPECT_EQ(stage_of([&] { run_stage(config, "rerank"); }), "rerank");
}

TEST(Pipeline, GlobalOnlyWeightsMatchGlobalFusion) {
  testutil::TempDir dir;
  auto config = load_pipeline_config(copy_fixtures(dir));
  config.reweight_params = ReweightParams{1.0, 0.0, 0.0};
  const auto reweighted = run_pipeline(config);
  const auto reweighted_top = testutil::read_text(config.output_dir / artifacts::kTopN);

  config.reweight_params.reset();
  config.fusion = FusionStrategy::kGlobal;
  const auto global = run_pipeline(config, "rerank");
  EXPECT_EQ(to_json(reweighted).dump(), to_json(global).dump());
  EXPECT_EQ(testutil::read_text(config.output_dir / artifacts::kTopN), reweighted_top);
}

TEST(Pipeline, ConfigErrorsNameTheStage) {
  testutil::TempDir dir;
  auto config = load_pipeline_config(copy_fixtures(dir));
  auto missing = config;
  missing.detections = dir.path() / "nope.jsonl";
  EXPECT_EQ(stage_of([&] { run_pipeline(missing); }), "score-local");

  auto no_calib = config;
  no_calib.calibration_queries.reset();
  EXPECT_EQ(stage_of([&] { run_pipeline(no_calib); }), "calibrate");

  auto bad_k = config;
  bad_k.k_shortlist = 0;
  EXPECT_EQ(stage_of([&] { run_pipeline(bad_k); }), "retrieve");

  auto bad_top = config;
  bad_top.top_n = 0;
  EXPECT_EQ(stage_of([&] { run_pipeline(bad_top); }), "rerank");

  auto bad_ks = config;
  bad_ks.recall_ks = {1, 0};
  EXPECT_EQ(stage_of([&] { run_pipeline(bad_ks); }), "evaluate");

  EXPECT_THROW(run_pipeline(config, "bogus"), Error);
}

TEST(Pipeline, CorruptRecordIsReportedWithItsStage) {
  testutil::TempDir dir;
  const auto path = copy_fixtures(dir);
  testutil::write_text(dir.file("detections.jsonl"),
                       testutil::read_text(dir.file("detections.jsonl")) + "{\"image_id\": \n");
  const auto config = load_pipeline_config(path);
  EXPECT_EQ(stage_of([&] { run_pipeline(config); }), "score-local");
}

TEST(Pipeline, ConfigJsonRoundTrip) {
  testutil::TempDir dir;
  const auto config = load_pipeline_config(copy_fixtures(dir));
  const auto again = pipeline_config_from_json(to_json(config), dir.path());
  EXPECT_EQ(to_json(again).dump(), to_json(config).dump());
  EXPECT_EQ(config.k_shortlist, 5u);
  EXPECT_EQ(config.top_n, 2u);
  EXPECT_EQ(config.workers, 2);
  EXPECT_NE(stage_seed(42, "retrieve"), stage_seed(42, "calibrate"));
  EXPECT_EQ(stage_seed(42, "retrieve"), stage_seed(42, "retrieve"));
}

TEST(Cli, RunAndStageSubcommands) {
  testutil::TempDir dir;
  const auto config = copy_fixtures(dir);
  auto r = cli(dir, "run --config \"" + config.string() + "\"");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto report = jsonl::Json::parse(r.out);
  EXPECT_EQ(report["num_queries"], 4);
  EXPECT_TRUE(fs::exists(dir.path() / "out" / artifacts::kReport));

  r = cli(dir, "run --config \"" + config.string() + "\" --from rerank");
  EXPECT_EQ(r.status, 0) << r.err;

  r = cli(dir, "retrieve --corpus \"" + dir.file("corpus.jsonl") + "\" --queries \"" + dir.file("queries.jsonl") +
                   "\" --k 3 --out \"" + dir.file("sl.jsonl") + "\"");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto lists = read_ranked_lists(dir.file("sl.jsonl"));
  ASSERT_EQ(lists.size(), 4u);
  EXPECT_EQ(lists[0].entries.size(), 3u);

  r = cli(dir, "rerank --shortlist \"" + dir.file("sl.jsonl") + "\" --strategy global --top-n 2 --out \"" +
                   dir.file("rr.jsonl") + "\"");
  ASSERT_EQ(r.status, 0) << r.err;
  r = cli(dir, "evaluate --rankings \"" + dir.file("rr.jsonl") + "\" --queries \"" + dir.file("queries.jsonl") +
                   "\" --k 1,2");
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_TRUE(jsonl::Json::parse(r.out)["recall_at"].contains("2"));
}

TEST(Cli, ErrorsAndExitCodes) {
  testutil::TempDir dir;
  const auto config = copy_fixtures(dir);
  auto j = jsonl::read_document(config.string());
  j["detections"] = "missing.jsonl";
  jsonl::write_document(dir.file("bad.json"), j);
  auto r = cli(dir, "run --config \"" + dir.file("bad.json") + "\"");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("error [score-local]"), std::string::npos) << r.err;

  r = cli(dir, "retrieve --corpus \"" + dir.file("nope.jsonl") + "\" --queries \"" + dir.file("queries.jsonl") +
                   "\" --out \"" + dir.file("x.jsonl") + "\"");
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("error [retrieve]"), std::string::npos) << r.err;

  r = cli(dir, "rerank --shortlist x --strategy sideways --out y");
  EXPECT_NE(r.status, 0);
  r = cli(dir, "");
  EXPECT_NE(r.status, 0);
}

TEST(Cli, LossSubcommand) {
  testutil::TempDir dir;
  testutil::write_text(dir.file("cons.json"),
                       "{\"p_full\": {\"yes\": 1.0, \"no\": 0.0}, \"p_masked\": {\"yes\": 0.0, \"no\": 1.0}}");
  auto r = cli(dir, "loss --kind cons --in \"" + dir.file("cons.json") + "\"");
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NEAR(jsonl::Json::parse(r.out)["value"].get<double>(), 2.0, 1e-12);

  testutil::write_text(dir.file("vqa.json"), "{\"distribution\": {\"yes\": 1.0, \"no\": 0.0}, \"gold\": \"no\"}");
  r = cli(dir, "loss --kind vqa --in \"" + dir.file("vqa.json") + "\" --out \"" + dir.file("vqa_out.json") + "\"");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto doc = jsonl::read_document(dir.file("vqa_out.json"));
  EXPECT_TRUE(doc["value"].is_null());
  EXPECT_EQ(doc["infinite"], true);
}
