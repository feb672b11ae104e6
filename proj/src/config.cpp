#include "hldet/config.hpp"

#include "hldet/classifiers.hpp"
#include "hldet/common.hpp"

namespace hldet::nn {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TransformerConfig, layers, dim, heads, ffn, max_positions, dropout)
}  // namespace hldet::nn

namespace hldet::gen {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GptConfig, dim, layers, heads, ffn, max_positions, dropout, vocab_max,
                                                vocab_min_count)
}  // namespace hldet::gen

namespace hldet::pre {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AwdLstmConfig, embed_dim, hidden, layers, embed_dropout, input_dropout,
                                                hidden_dropout, weight_drop, output_dropout, vocab_max, vocab_min_count)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EncoderConfig, net, mask_prob, vocab_max, vocab_min_count)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PretrainOptions, epochs, lr, batch_size, distill_temperature,
                                                distill_weight)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BackboneSuiteOptions, awd, awd_training, encoder, encoder_training,
                                                distilled_layers, distill_training)
}  // namespace hldet::pre

namespace hldet::app {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DataSection, corpus, synth_first_year, synth_last_year, synth_per_year,
                                                synth_seed, defender_years, attacker_years, defender_real,
                                                attacker_real, balance_ratio)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GeneratorSection, model, pretrain_epochs, pretrain_lr, finetune_epochs,
                                                finetune_lr, batch_size, temperature, max_tokens)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ClassifierSection, specs, seeds, overrides, backbones,
                                                misclassified_examples)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SurveySection, id, sets, per_set, generated, real, threshold, host, port,
                                                operator_token)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PipelineConfig, seed, out, data, generator, classifiers, survey)

namespace {

// Every key in `user` must exist in `defaults`; free-form objects are skipped.
void check_keys(const nlohmann::json& user, const nlohmann::json& defaults, const std::string& path) {
  if (!user.is_object() || !defaults.is_object()) return;
  if (path == "classifiers.overrides") return;
  for (const auto& [key, value] : user.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!defaults.contains(key)) throw ConfigError("unknown config key '" + here + "'");
    check_keys(value, defaults[key], here);
  }
}

}  // namespace

void PipelineConfig::validate() const {
  if (out.empty()) throw ConfigError("output directory must be set");
  if (data.defender_years.empty() || data.attacker_years.empty()) throw ConfigError("both eras need at least one year");
  for (int y : data.defender_years)
    if (std::find(data.attacker_years.begin(), data.attacker_years.end(), y) != data.attacker_years.end())
      throw ConfigError("year " + std::to_string(y) + " is in both eras");
  if (data.synth_first_year > data.synth_last_year) throw ConfigError("synth_first_year must be <= synth_last_year");
  if (!(data.balance_ratio > 0.0)) throw ConfigError("balance_ratio must be > 0");
  if (!(generator.temperature > 0.0)) throw ConfigError("temperature must be > 0");
  if (generator.max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
  if (generator.max_tokens + 2 > generator.model.max_positions)
    throw ConfigError("generator max_positions must exceed max_tokens + 1");
  if (classifiers.specs.empty()) throw ConfigError("no classifier specs selected");
  for (const auto& name : classifiers.specs)
    clf::spec_from_json(name, classifiers.overrides.value(name, nlohmann::json::object()));
  for (const auto& [name, v] : classifiers.overrides.items()) clf::default_spec(name);
  if (survey.sets * survey.per_set == 0) throw ConfigError("survey must have at least one item");
  if (survey.generated + survey.real > survey.sets * survey.per_set)
    throw ConfigError("survey generated + real exceeds the item count");
  if (survey.threshold < 0.0 || survey.threshold > 1.0) throw ConfigError("survey threshold must be in [0, 1]");
  if (survey.port < 0 || survey.port > 65535) throw ConfigError("survey port out of range");
}

nlohmann::ordered_json to_json(const PipelineConfig& cfg) {
  return nlohmann::ordered_json::parse(nlohmann::json(cfg).dump());
}

PipelineConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  check_keys(j, nlohmann::json(PipelineConfig{}), "");
  try {
    return j.get<PipelineConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

PipelineConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return config_from_json(j);
}

}  // namespace hldet::app
