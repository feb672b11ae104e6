#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hldet/backbones.hpp"
#include "hldet/generator.hpp"

namespace hldet::app {

struct DataSection {
  /// `publish_date,headline_text` CSV; empty means synthesize one into <out>/corpus.
  std::string corpus;
  int synth_first_year = 2010;
  int synth_last_year = 2017;
  std::size_t synth_per_year = 30000;
  std::uint64_t synth_seed = 2021;
  std::vector<int> defender_years{2015};
  std::vector<int> attacker_years{2016, 2017};
  /// Real headlines sampled from each era (0 keeps every one).
  std::size_t defender_real = 20000;
  std::size_t attacker_real = 10000;
  double balance_ratio = 1.0;
};

struct GeneratorSection {
  gen::GptConfig model;
  int pretrain_epochs = 3;
  float pretrain_lr = 1e-3f;
  int finetune_epochs = 2;
  float finetune_lr = 5e-4f;
  int batch_size = 32;
  double temperature = 0.9;
  int max_tokens = 24;
};

struct ClassifierSection {
  std::vector<std::string> specs{"naive_bayes", "elastic_net", "cnn",  "bilstm",
                                 "bilstm_attention", "ulmfit", "bert", "distilbert"};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  /// Per-spec parameter overrides, e.g. {"cnn": {"epochs": 3}}.
  nlohmann::json overrides = nlohmann::json::object();
  pre::BackboneSuiteOptions backbones;
  std::size_t misclassified_examples = 10;
};

struct SurveySection {
  std::string id = "main";
  std::size_t sets = 3;
  std::size_t per_set = 31;
  std::size_t generated = 45;
  std::size_t real = 30;
  double threshold = 0.80;
  std::string host = "127.0.0.1";
  int port = 8080;
  /// Bearer token for the aggregate endpoint; empty disables that endpoint.
  std::string operator_token;
};

struct PipelineConfig {
  std::uint64_t seed = 2021;
  std::string out = "runs/default";
  DataSection data;
  GeneratorSection generator;
  ClassifierSection classifiers;
  SurveySection survey;

  /// Throws ConfigError on out-of-range values or unknown spec names.
  void validate() const;
  std::filesystem::path out_dir() const { return out; }
};

nlohmann::ordered_json to_json(const PipelineConfig& cfg);
/// Defaults overridden by `j`; unknown keys raise ConfigError.
PipelineConfig config_from_json(const nlohmann::json& j);
/// Reads a JSON config file; ConfigError when missing or malformed.
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace hldet::app
