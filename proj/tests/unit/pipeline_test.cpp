#include <cstdlib>
#include <filesystem>

#include <gtest/gtest.h>

#include "hldet/common.hpp"
#include "hldet/config.hpp"
#include "hldet/pipeline.hpp"

using namespace hldet;
using namespace hldet::app;
namespace fs = std::filesystem;

namespace {

// Tiny end-to-end configuration: a few hundred headlines, a one-epoch generator,
// and only the two linear baselines.
PipelineConfig tiny_config(const std::string& name) {
  PipelineConfig cfg;
  cfg.out = (fs::temp_directory_path() / ("hldet_pipeline_" + name)).string();
  cfg.data.synth_first_year = 2014;
  cfg.data.synth_last_year = 2017;
  cfg.data.synth_per_year = 400;
  cfg.data.defender_real = 200;
  cfg.data.attacker_real = 100;
  cfg.generator.model = {.dim = 32, .layers = 1, .heads = 2, .ffn = 64, .max_positions = 32};
  cfg.generator.pretrain_epochs = 1;
  cfg.generator.finetune_epochs = 1;
  cfg.classifiers.specs = {"naive_bayes", "elastic_net"};
  cfg.classifiers.misclassified_examples = 3;
  cfg.survey.sets = 2;
  cfg.survey.per_set = 10;
  cfg.survey.generated = 8;
  cfg.survey.real = 6;
  return cfg;
}

int run_cli(const std::string& args) {
  const int rc = std::system((std::string(HLDET_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Config, DefaultsRoundTripAndValidate) {
  PipelineConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  const auto j = to_json(cfg);
  EXPECT_EQ(to_json(config_from_json(nlohmann::json::parse(j.dump()))), j);
  EXPECT_EQ(cfg.data.defender_real, 20000u);
  EXPECT_EQ(cfg.classifiers.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(cfg.survey.sets * cfg.survey.per_set, 93u);
}

TEST(Config, UnknownKeysAndBadValuesAreRejected) {
  EXPECT_THROW(config_from_json({{"sed", 1}}), ConfigError);
  EXPECT_THROW(config_from_json({{"data", {{"defender_reel", 5}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"generator", {{"model", {{"width", 5}}}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"seed", "one"}}), ConfigError);
  EXPECT_NO_THROW(config_from_json({{"classifiers", {{"overrides", {{"cnn", {{"epochs", 1}}}}}}}}));

  auto bad = [](auto mutate) {
    PipelineConfig cfg;
    mutate(cfg);
    return cfg;
  };
  EXPECT_THROW(bad([](auto& c) { c.classifiers.specs = {"svm"}; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.classifiers.overrides = {{"cnn", {{"epoch", 1}}}}; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.data.attacker_years = {2015}; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.generator.temperature = 0.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.survey.generated = 90; }).validate(), ConfigError);
}

TEST(Pipeline, MissingCorpusIsAUserError) {
  auto cfg = tiny_config("missing");
  cfg.data.corpus = "/nonexistent/corpus.csv";
  try {
    prepare_corpus(cfg);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("corpus not found"), std::string::npos);
  }
}

TEST(Pipeline, StagesAreIdempotentAndManifestsStable) {
  auto cfg = tiny_config("idempotent");
  fs::remove_all(cfg.out);
  const auto L = layout(cfg);

  const auto first = run_build(cfg);
  EXPECT_FALSE(first.train.empty());
  EXPECT_FALSE(first.test.empty());
  const std::string dataset_manifest = read_file(L.dataset_dir() / "manifest.json");
  const std::string generator_manifest = read_file(L.generator_dir() / "manifest.json");
  const std::string jsonl = read_file(L.dataset_jsonl());

  // Reuse from cache, then a cold rebuild: both byte-identical.
  EXPECT_EQ(run_build(cfg).hash(), first.hash());
  fs::remove_all(cfg.out);
  EXPECT_EQ(run_build(cfg).hash(), first.hash());
  EXPECT_EQ(read_file(L.dataset_dir() / "manifest.json"), dataset_manifest);
  EXPECT_EQ(read_file(L.generator_dir() / "manifest.json"), generator_manifest);
  EXPECT_EQ(read_file(L.dataset_jsonl()), jsonl);

  const auto reports = run_analyze(cfg);
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_EQ(reports[0].scope, "defender");
  EXPECT_EQ(reports[1].scope, "attacker");
  EXPECT_TRUE(fs::exists(L.analysis_dir() / "table1.txt"));
  EXPECT_TRUE(fs::exists(L.analysis_dir() / "attacker_generated_words.csv"));

  const auto outcome = run_train_eval(cfg);
  EXPECT_TRUE(outcome.failures.empty());
  ASSERT_EQ(outcome.reports.size(), 2u);
  EXPECT_NE(outcome.table.find("Naive Bayes"), std::string::npos) << outcome.table;
  EXPECT_TRUE(fs::exists(L.eval_dir() / "naive_bayes_misclassified.json"));
  EXPECT_TRUE(fs::exists(L.eval_dir() / "summary.json"));
  const std::string nb_report = read_file(L.eval_dir() / "naive_bayes.json");
  run_train_eval(cfg);
  auto strip_timing = [](std::string s) {
    auto j = nlohmann::json::parse(s);
    for (auto& r : j["runs"]) r.erase("train_seconds");
    return j.dump();
  };
  EXPECT_EQ(strip_timing(read_file(L.eval_dir() / "naive_bayes.json")), strip_timing(nb_report));

  const auto s = run_survey_create(cfg);
  EXPECT_EQ(s.items.size(), 20u);
  EXPECT_NO_THROW(run_survey_create(cfg));
  const auto agg = run_survey_aggregate(cfg);
  EXPECT_TRUE(agg.no_judgments);
  EXPECT_TRUE(fs::exists(L.survey_dir("main") / "per_headline.csv"));

  const auto text = run_report(cfg);
  EXPECT_NE(text.find("Ovr. Acc."), std::string::npos);
  EXPECT_NE(text.find("Human"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  const auto dir = fs::temp_directory_path() / "hldet_cli_test";
  fs::create_directories(dir);
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("build --config /nonexistent/config.json"), 2);
  write_file(dir / "bad.json", R"({"data": {"corpus": "/nonexistent/corpus.csv"}})");
  EXPECT_EQ(run_cli("build --config " + (dir / "bad.json").string() + " --out " + (dir / "out").string()), 2);
  write_file(dir / "typo.json", R"({"seeed": 3})");
  EXPECT_EQ(run_cli("build --config " + (dir / "typo.json").string()), 2);
  EXPECT_EQ(run_cli("train-eval --out " + (dir / "empty").string()), 2);
  EXPECT_EQ(run_cli("train-eval --spec svm --out " + (dir / "empty").string()), 2);
}
