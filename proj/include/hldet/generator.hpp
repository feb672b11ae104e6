#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "hldet/common.hpp"
#include "hldet/corpus.hpp"
#include "hldet/nn/graph.hpp"
#include "hldet/vocab.hpp"

namespace hldet::gen {

/// Autoregressive next-token scorer. Implementations must be read-only at inference.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual const VocabIndex& vocab() const = 0;
  virtual int bos_id() const = 0;
  /// Row i holds next-token logits after prefixes[i] (which starts with bos).
  virtual nn::Matrix next_logits(const std::vector<std::vector<int>>& prefixes) const = 0;
};

/// Logits depend only on the previous token: table(prev, next). For toy models.
class BigramTableModel final : public LanguageModel {
 public:
  BigramTableModel(VocabIndex vocab, int bos_id, nn::Matrix table);
  const VocabIndex& vocab() const override { return vocab_; }
  int bos_id() const override { return bos_; }
  nn::Matrix next_logits(const std::vector<std::vector<int>>& prefixes) const override;

 private:
  VocabIndex vocab_;
  int bos_;
  nn::Matrix table_;
};

struct GenerationConfig {
  double temperature = 0.9;
  /// Hard stop in word tokens.
  int max_tokens = 24;
  std::string end_token = "<eos>";
  std::uint64_t seed = 0;
  std::size_t count = 0;

  /// Throws ConfigError unless temperature > 0 and max_tokens >= 1.
  void validate() const;
};

struct Sample {
  std::string text;
  std::vector<int> tokens;
  /// True when max_tokens ran out before the end token.
  bool hit_max_tokens = false;
};

/// Softmax of logits / temperature in double precision. Entries in `banned`
/// receive zero probability.
std::vector<double> temperature_distribution(const float* logits, int n, double temperature,
                                             const std::vector<int>& banned);

/// Re-feeds the growing prefix one token at a time until the end token or max_tokens.
Sample sample_headline(const LanguageModel& lm, const GenerationConfig& cfg, Rng& rng);
/// Seeds a fresh generator from cfg.seed.
Sample sample_headline(const LanguageModel& lm, const GenerationConfig& cfg);

/// `n` independent samples decoded in lockstep (one batched model call per step).
std::vector<Sample> sample_many(const LanguageModel& lm, const GenerationConfig& cfg, std::size_t n,
                                Rng& rng);

/// argmax decode with the same stopping rules; the temperature -> 0 limit of sampling.
Sample greedy_decode(const LanguageModel& lm, const GenerationConfig& cfg);

struct GptConfig {
  int dim = 96;
  int layers = 2;
  int heads = 4;
  int ffn = 384;
  /// bos + max_tokens + eos must fit.
  int max_positions = 32;
  float dropout = 0.1f;
  int vocab_max = 30000;
  int vocab_min_count = 2;
};

struct LmTrainOptions {
  int epochs = 3;
  float lr = 1e-3f;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

/// Small decoder-only transformer over word tokens (causal attention, tied embeddings).
class GptModel final : public LanguageModel {
 public:
  GptModel(VocabIndex vocab, GptConfig cfg, std::uint64_t seed);
  ~GptModel() override;
  GptModel(GptModel&&) noexcept;

  const VocabIndex& vocab() const override { return vocab_; }
  int bos_id() const override;
  int eos_id() const;
  nn::Matrix next_logits(const std::vector<std::vector<int>>& prefixes) const override;

  /// bos + tokens + eos, truncated to max_positions.
  std::vector<int> to_sequence(const std::string& text) const;
  /// Mean per-token negative log-likelihood over `texts` (no dropout).
  double mean_loss(const std::vector<std::string>& texts) const;
  /// Teacher-forced training with Adam; returns the mean training loss per epoch.
  std::vector<double> fit(const std::vector<std::string>& texts, const LmTrainOptions& opts);
  /// Adds tokens seen at least `min_count` times in `texts`.
  int extend_vocab(const std::vector<std::string>& texts, int min_count, Rng& rng);

  std::unique_ptr<GptModel> clone() const;
  const GptConfig& config() const { return cfg_; }
  nn::ParameterSet& parameters();

  void save(const std::filesystem::path& dir) const;
  static std::unique_ptr<GptModel> load(const std::filesystem::path& dir);

 private:
  struct Impl;
  VocabIndex vocab_;
  GptConfig cfg_;
  std::unique_ptr<Impl> impl_;
};

/// Pretrains a GptModel on unlabeled headline text.
std::unique_ptr<GptModel> pretrain_lm(const std::vector<std::string>& texts, const GptConfig& cfg,
                                      const LmTrainOptions& opts);

/// A fine-tuned generator bound to the era it was fitted on.
struct LMHandle {
  std::shared_ptr<const LanguageModel> model;
  corpus::Era era = corpus::Era::defender;
  nlohmann::ordered_json manifest;
};

struct FinetuneReport {
  double loss_before = 0.0;
  double loss_after = 0.0;
  std::vector<double> epoch_losses;
};

/// Fine-tunes a copy of `base` (or a fresh model when null) on real headlines of
/// exactly one era. Errors: empty input (DataError), non-real input (DataError),
/// input spanning both eras or none ("era contamination", DataError).
LMHandle finetune_lm(const std::vector<corpus::Headline>& real_headlines, const LmTrainOptions& opts,
                     const GptModel* base = nullptr, const corpus::EraConfig& eras = {},
                     const GptConfig& fresh_cfg = {}, FinetuneReport* report = nullptr);

void save_handle(const LMHandle& handle, const std::filesystem::path& dir);
LMHandle load_handle(const std::filesystem::path& dir);

struct GenerationResult {
  std::vector<corpus::Headline> headlines;
  std::size_t attempts = 0;
  std::size_t rejected_collisions = 0;
  std::size_t rejected_empty = 0;
  std::size_t truncated = 0;
  /// count - headlines.size() when the retry budget ran out.
  std::size_t shortfall = 0;
};

/// Samples cfg.count distinct generated headlines, discarding any that match the
/// exclusion set or an earlier sample. Gives up after 4*count + 64 attempts.
GenerationResult generate_batch(const LMHandle& lm, const GenerationConfig& cfg,
                                const std::unordered_set<std::string>& exclusion_set,
                                const corpus::EraConfig& eras = {});

}  // namespace hldet::gen
