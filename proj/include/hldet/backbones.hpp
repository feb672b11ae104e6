#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hldet/nn/layers.hpp"
#include "hldet/vocab.hpp"

// Pretrained text encoders used by the transfer-learning classifiers: a stacked
// recurrent language model and masked-language-model transformer encoders.
namespace hldet::pre {

struct AwdLstmConfig {
  int embed_dim = 128;
  int hidden = 256;
  int layers = 2;
  float embed_dropout = 0.05f;
  float input_dropout = 0.25f;
  float hidden_dropout = 0.15f;
  float weight_drop = 0.2f;
  float output_dropout = 0.1f;
  int vocab_max = 20000;
  int vocab_min_count = 2;
};

struct EncoderConfig {
  nn::TransformerConfig net{.layers = 4, .dim = 128, .heads = 4, .ffn = 512, .max_positions = 32, .dropout = 0.1f};
  float mask_prob = 0.15f;
  int vocab_max = 20000;
  int vocab_min_count = 2;
};

struct PretrainOptions {
  int epochs = 2;
  float lr = 1e-3f;
  int batch_size = 64;
  std::uint64_t seed = 0;
  /// Distillation only: softmax temperature and weight of the soft-target loss.
  float distill_temperature = 2.0f;
  float distill_weight = 0.5f;
};

nlohmann::ordered_json to_json(const AwdLstmConfig& c);
nlohmann::ordered_json to_json(const EncoderConfig& c);
AwdLstmConfig awd_config_from_json(const nlohmann::json& j);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

/// Stacked LSTM language model with a tied softmax. Parameters live under "awd.".
class AwdLstmNet {
 public:
  AwdLstmNet() = default;
  AwdLstmNet(nn::ParameterSet& ps, int vocab, const AwdLstmConfig& cfg, Rng& rng);
  /// Final-layer outputs [B*T, embed_dim].
  nn::Var encode(nn::Graph& g, std::span<const int> ids, std::span<const int> lengths, int steps) const;
  nn::Var decode(nn::Graph& g, nn::Var hidden) const;
  const AwdLstmConfig& config() const { return cfg_; }

 private:
  AwdLstmConfig cfg_;
  nn::Parameter* emb_ = nullptr;
  nn::Parameter* out_bias_ = nullptr;
  std::vector<nn::Lstm> layers_;
};

/// Bidirectional transformer encoder. Parameters live under "enc.".
nn::TransformerStack make_encoder(nn::ParameterSet& ps, int vocab, const EncoderConfig& cfg, Rng& rng);

/// A pretrained network: vocabulary, architecture config and weights.
struct Backbone {
  std::string id;
  /// "awd_lstm" or "encoder".
  std::string kind;
  VocabIndex vocab;
  nlohmann::ordered_json config;
  nn::ParameterSet params;
  nlohmann::ordered_json manifest;
};

/// Next-token pretraining on <bos> text <eos> sequences.
std::shared_ptr<Backbone> pretrain_awd_lstm(const std::string& id, const std::vector<std::string>& texts,
                                            const AwdLstmConfig& cfg, const PretrainOptions& opts);
/// Masked-token pretraining on <cls> text sequences.
std::shared_ptr<Backbone> pretrain_encoder(const std::string& id, const std::vector<std::string>& texts,
                                           const EncoderConfig& cfg, const PretrainOptions& opts);
/// Student with `layers` blocks initialized from evenly spaced teacher blocks, trained
/// on a mix of the masked-token loss and the teacher's softened predictions.
std::shared_ptr<Backbone> distill_encoder(const std::string& id, const Backbone& teacher, int layers,
                                          const std::vector<std::string>& texts, const PretrainOptions& opts);

void save_backbone(const Backbone& b, const std::filesystem::path& dir);
std::shared_ptr<Backbone> load_backbone(const std::filesystem::path& dir);

/// Directory of backbones keyed by id, loaded lazily and cached. Thread-safe.
class BackboneStore {
 public:
  explicit BackboneStore(std::filesystem::path dir) : dir_(std::move(dir)) {}
  bool has(const std::string& id) const;
  /// Throws ConfigError when the backbone has not been built.
  std::shared_ptr<const Backbone> get(const std::string& id) const;
  void put(std::shared_ptr<Backbone> backbone);
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  mutable std::map<std::string, std::shared_ptr<const Backbone>> cache_;
};

struct BackboneSuiteOptions {
  AwdLstmConfig awd;
  PretrainOptions awd_training{.epochs = 2, .lr = 2e-3f, .batch_size = 64};
  EncoderConfig encoder;
  PretrainOptions encoder_training{.epochs = 3, .lr = 1e-3f, .batch_size = 64};
  int distilled_layers = 2;
  PretrainOptions distill_training{.epochs = 1, .lr = 5e-4f, .batch_size = 64};
};

nlohmann::ordered_json to_json(const BackboneSuiteOptions& o);

/// Builds "awd_lstm", "bert" and "distilbert" into the store unless already present.
void build_backbones(BackboneStore& store, const std::vector<std::string>& texts, const BackboneSuiteOptions& opts,
                     std::uint64_t seed);

}  // namespace hldet::pre
