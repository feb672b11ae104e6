#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hldet/backbones.hpp"
#include "hldet/corpus.hpp"
#include "hldet/vocab.hpp"

namespace hldet::clf {

using corpus::Label;
using corpus::LabeledExample;

struct NaiveBayesSpec {
  double alpha = 1.0;
  int vocab_max = 100000;
};

/// Logistic regression with a mixed L1/L2 penalty over token counts.
struct ElasticNetSpec {
  double l1_ratio = 0.5;
  /// Candidate penalty strengths; the one with the best dev accuracy is kept.
  std::vector<double> strengths{1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5};
  int max_iter = 300;
  int vocab_max = 100000;
};

struct CnnSpec {
  int embed_dim = 75;
  std::array<int, 2> filters{8, 4};
  int kernel_size = 3;
  int epochs = 5;
  float lr = 1e-3f;
  int batch_size = 32;
  int max_len = 24;
  int vocab_max = 20000;
};

struct BiLstmSpec {
  int units = 35;
  int embed_dim = 100;
  float spatial_dropout = 0.33f;
  int epochs = 5;
  float lr = 1e-3f;
  int batch_size = 32;
  int max_len = 24;
  int vocab_max = 20000;
};

struct BiLstmAttentionSpec : BiLstmSpec {
  int attention_dim = 35;
};

struct UlmfitStage {
  /// "lstm" (recurrent weights only), "all", or "head".
  std::string trainable;
  float lr = 0.0f;
  int epochs = 1;
};

struct UlmfitSpec {
  std::string backbone = "awd_lstm";
  std::vector<UlmfitStage> stages{{"lstm", 0.01f, 1}, {"all", 7.5e-5f, 1}, {"head", 0.05f, 1}};
  int head_hidden = 50;
  float head_dropout = 0.1f;
  int batch_size = 64;
  int max_len = 24;
};

struct TransformerSpec {
  /// Backbone id: "bert" or "distilbert".
  std::string encoder = "bert";
  int epochs = 1;
  float lr = 4e-5f;
  int batch_size = 8;
  int max_len = 24;
  /// "cls" or "mean".
  std::string pooling = "mean";
  float head_dropout = 0.1f;
};

using ClassifierSpec = std::variant<NaiveBayesSpec, ElasticNetSpec, CnnSpec, BiLstmSpec, BiLstmAttentionSpec,
                                    UlmfitSpec, TransformerSpec>;

/// The ladder in display order: naive_bayes, elastic_net, cnn, bilstm,
/// bilstm_attention, ulmfit, bert, distilbert.
const std::vector<std::string>& spec_names();
std::string display_name(const std::string& spec_name);
/// Throws ConfigError for an unknown name.
ClassifierSpec default_spec(const std::string& name);
std::string spec_name(const ClassifierSpec& spec);
nlohmann::ordered_json spec_to_json(const ClassifierSpec& spec);
/// Defaults for `name` overridden by the keys present in `overrides`.
ClassifierSpec spec_from_json(const std::string& name, const nlohmann::json& overrides);

struct Prediction {
  Label label = Label::real;
  /// Probability of the generated class.
  double score = 0.0;
};

/// A fitted detector. Immutable after training; scoring is safe from several threads.
class TrainedModel {
 public:
  virtual ~TrainedModel() = default;
  /// Probability of the generated class for each text.
  virtual std::vector<double> scores(const std::vector<std::string>& texts) const = 0;
  virtual void save_weights(const std::filesystem::path& dir) const = 0;

  const ClassifierSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  /// Spec, seed, vocabulary hash, optimizer and per-epoch log.
  const nlohmann::ordered_json& manifest() const { return manifest_; }
  nlohmann::ordered_json& manifest() { return manifest_; }

 protected:
  TrainedModel(ClassifierSpec spec, std::uint64_t seed) : spec_(std::move(spec)), seed_(seed) {}
  ClassifierSpec spec_;
  std::uint64_t seed_ = 0;
  nlohmann::ordered_json manifest_;
};

/// Where pretrained backbones come from. Without a store, transfer models pretrain a
/// small backbone on the training texts themselves.
struct TrainContext {
  const pre::BackboneStore* backbones = nullptr;
  pre::BackboneSuiteOptions fallback;
  /// Optional progress sink for epoch logs.
  std::function<void(const std::string&)> progress;
};

/// Fits the classifier described by `spec`. `dev` is only used for monitoring and
/// for choosing the elastic-net strength. Throws DataError("degenerate training set")
/// when train lacks either class.
std::unique_ptr<TrainedModel> train(const ClassifierSpec& spec, const std::vector<LabeledExample>& train,
                                    const std::vector<LabeledExample>& dev, std::uint64_t seed,
                                    const TrainContext& ctx = {});

/// label = generated iff score >= 0.5.
std::vector<Prediction> predict(const TrainedModel& model, const std::vector<std::string>& texts);
double accuracy(const TrainedModel& model, const std::vector<LabeledExample>& examples);

void save_model(const TrainedModel& model, const std::filesystem::path& dir);
std::unique_ptr<TrainedModel> load_model(const std::filesystem::path& dir);

// Implementation entry points, one per model family.
namespace detail {
std::unique_ptr<TrainedModel> train_naive_bayes(const NaiveBayesSpec&, const std::vector<LabeledExample>&,
                                                const std::vector<LabeledExample>&, std::uint64_t, const TrainContext&);
std::unique_ptr<TrainedModel> train_elastic_net(const ElasticNetSpec&, const std::vector<LabeledExample>&,
                                                const std::vector<LabeledExample>&, std::uint64_t, const TrainContext&);
std::unique_ptr<TrainedModel> train_cnn(const CnnSpec&, const std::vector<LabeledExample>&,
                                        const std::vector<LabeledExample>&, std::uint64_t, const TrainContext&);
std::unique_ptr<TrainedModel> train_bilstm(const BiLstmSpec&, bool attention, int attention_dim,
                                           const std::vector<LabeledExample>&, const std::vector<LabeledExample>&,
                                           std::uint64_t, const TrainContext&);
std::unique_ptr<TrainedModel> train_ulmfit(const UlmfitSpec&, const std::vector<LabeledExample>&,
                                           const std::vector<LabeledExample>&, std::uint64_t, const TrainContext&);
std::unique_ptr<TrainedModel> train_transformer(const TransformerSpec&, const std::vector<LabeledExample>&,
                                                const std::vector<LabeledExample>&, std::uint64_t, const TrainContext&);

std::unique_ptr<TrainedModel> load_naive_bayes(const NaiveBayesSpec&, std::uint64_t, const std::filesystem::path&);
std::unique_ptr<TrainedModel> load_elastic_net(const ElasticNetSpec&, std::uint64_t, const std::filesystem::path&);
std::unique_ptr<TrainedModel> load_neural(const ClassifierSpec&, std::uint64_t, const std::filesystem::path&);
}  // namespace detail

}  // namespace hldet::clf
