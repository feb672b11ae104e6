#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "hldet/analysis.hpp"
#include "hldet/config.hpp"
#include "hldet/corpus.hpp"
#include "hldet/evaluation.hpp"
#include "hldet/survey.hpp"

/// End-to-end stages shared by the CLI and the acceptance suite. Every stage
/// writes under cfg.out and reuses an earlier result whose recorded input
/// fingerprint matches, so reruns with the same config are cheap and produce
/// byte-identical manifests.
namespace hldet::app {

/// Output layout below cfg.out.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path config_snapshot() const { return root / "config.resolved.json"; }
  std::filesystem::path corpus_dir() const { return root / "corpus"; }
  std::filesystem::path generator_dir() const { return root / "generator"; }
  std::filesystem::path dataset_dir() const { return root / "dataset"; }
  std::filesystem::path dataset_jsonl() const { return dataset_dir() / "dataset.jsonl"; }
  std::filesystem::path analysis_dir() const { return root / "analysis"; }
  std::filesystem::path backbone_dir() const { return root / "backbones"; }
  std::filesystem::path eval_dir() const { return root / "eval"; }
  std::filesystem::path survey_dir(const std::string& id) const { return root / "survey" / id; }
  std::filesystem::path report_dir() const { return root / "report"; }
};

Layout layout(const PipelineConfig& cfg);

/// Writes config.resolved.json (validated, defaults filled in).
void write_config_snapshot(const PipelineConfig& cfg);

struct CorpusPartition {
  /// Sampled, de-duplicated real headlines of each era.
  std::vector<corpus::Headline> defender_real;
  std::vector<corpus::Headline> attacker_real;
  /// Every headline outside both eras (unlabeled pretraining text).
  std::vector<std::string> background;
  /// Every real text in the corpus; generated samples must avoid these.
  std::vector<std::string> all_real_texts;
  std::size_t rejected_rows = 0;
  std::string corpus_hash;
};

/// Loads cfg.data.corpus (DataError "corpus not found" when missing) or
/// synthesizes one, then splits by era and samples each era.
CorpusPartition prepare_corpus(const PipelineConfig& cfg);

struct GeneratedSets {
  std::vector<corpus::Headline> defender;
  std::vector<corpus::Headline> attacker;
  nlohmann::ordered_json manifest;
};

/// Pretrains the generator on background text, fine-tunes one copy per era and
/// samples as many headlines as each era has real ones (times balance_ratio for
/// the defender era).
GeneratedSets run_generate(const PipelineConfig& cfg, const CorpusPartition& part);

/// Corpus + generation + dataset assembly; writes dataset.jsonl and manifest.json.
corpus::DatasetBundle run_build(const PipelineConfig& cfg);

/// Loads a dataset written by run_build (ConfigError when absent).
corpus::DatasetBundle load_built_dataset(const PipelineConfig& cfg);

/// Real vs generated comparison for the defender scope (train + dev) and the
/// attacker scope (test). Writes JSON, text tables and word-frequency CSVs.
std::vector<analysis::ComparisonReport> run_analyze(const PipelineConfig& cfg);

struct TrainEvalOutcome {
  std::vector<eval::EvalReport> reports;
  /// spec name -> error message for specs that failed.
  std::map<std::string, std::string> failures;
  std::string table;
};

/// Pretrains the shared backbones (when a selected spec needs them), then trains
/// and evaluates each selected spec over the configured seeds.
TrainEvalOutcome run_train_eval(const PipelineConfig& cfg);

/// Samples the survey from the attacker-era test split and stores it under survey/<id>.
survey::Survey run_survey_create(const PipelineConfig& cfg);

/// Aggregates the persisted judgments; writes aggregate.json, aggregate.txt,
/// per_headline.csv and judgments.json next to the logs.
survey::SurveyAggregate run_survey_aggregate(const PipelineConfig& cfg);

/// Combined text report from whatever stages have finished; also written to report/.
std::string run_report(const PipelineConfig& cfg);

}  // namespace hldet::app
