#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "hldet/generator.hpp"
#include "hldet/text.hpp"

namespace hldet::gen {

namespace {

double unit_uniform(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<int> banned_ids(const LanguageModel& lm) {
  std::vector<int> banned{VocabIndex::kPad, VocabIndex::kUnk, lm.bos_id()};
  return banned;
}

int end_id(const LanguageModel& lm, const GenerationConfig& cfg) {
  return lm.vocab().contains(cfg.end_token) ? lm.vocab().id(cfg.end_token) : -1;
}

int draw(const std::vector<double>& probs, Rng& rng) {
  double u = unit_uniform(rng), acc = 0.0;
  int last = -1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = static_cast<int>(i);
    if (u < acc) return last;
  }
  return last;
}

Sample finish(const LanguageModel& lm, std::vector<int> tokens, bool hit_max) {
  Sample s;
  std::vector<std::string> words;
  for (int t : tokens) words.push_back(lm.vocab().token(t));
  s.text = join(words, " ");
  s.tokens = std::move(tokens);
  s.hit_max_tokens = hit_max;
  return s;
}

}  // namespace

BigramTableModel::BigramTableModel(VocabIndex vocab, int bos_id, nn::Matrix table)
    : vocab_(std::move(vocab)), bos_(bos_id), table_(std::move(table)) {
  if (table_.rows() != vocab_.size() || table_.cols() != vocab_.size())
    throw std::invalid_argument("bigram table must be vocab x vocab");
}

nn::Matrix BigramTableModel::next_logits(const std::vector<std::vector<int>>& prefixes) const {
  nn::Matrix out(static_cast<Eigen::Index>(prefixes.size()), table_.cols());
  for (std::size_t i = 0; i < prefixes.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = table_.row(prefixes[i].empty() ? bos_ : prefixes[i].back());
  return out;
}

void GenerationConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw ConfigError("temperature must be > 0, got " + std::to_string(temperature));
  if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1, got " + std::to_string(max_tokens));
}

std::vector<double> temperature_distribution(const float* logits, int n, double temperature,
                                             const std::vector<int>& banned) {
  std::vector<double> p(static_cast<std::size_t>(n));
  std::vector<bool> allowed(static_cast<std::size_t>(n), true);
  for (int b : banned)
    if (b >= 0 && b < n) allowed[static_cast<std::size_t>(b)] = false;
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    if (allowed[static_cast<std::size_t>(i)]) best = std::max(best, static_cast<double>(logits[i]) / temperature);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    auto k = static_cast<std::size_t>(i);
    p[k] = allowed[k] ? std::exp(static_cast<double>(logits[i]) / temperature - best) : 0.0;
    total += p[k];
  }
  if (total > 0.0)
    for (double& v : p) v /= total;
  return p;
}

std::vector<Sample> sample_many(const LanguageModel& lm, const GenerationConfig& cfg, std::size_t n,
                                Rng& rng) {
  cfg.validate();
  const int eos = end_id(lm, cfg);
  const auto banned = banned_ids(lm);
  std::vector<std::vector<int>> prefixes(n, std::vector<int>{lm.bos_id()});
  std::vector<Sample> out(n);
  std::vector<std::size_t> active(n);
  for (std::size_t i = 0; i < n; ++i) active[i] = i;
  for (int step = 0; step < cfg.max_tokens && !active.empty(); ++step) {
    std::vector<std::vector<int>> batch;
    batch.reserve(active.size());
    for (std::size_t i : active) batch.push_back(prefixes[i]);
    nn::Matrix logits = lm.next_logits(batch);
    std::vector<std::size_t> still;
    for (std::size_t r = 0; r < active.size(); ++r) {
      std::size_t i = active[r];
      auto probs = temperature_distribution(logits.row(static_cast<Eigen::Index>(r)).data(),
                                            static_cast<int>(logits.cols()), cfg.temperature, banned);
      int tok = draw(probs, rng);
      if (tok < 0 || tok == eos) {
        out[i] = finish(lm, {prefixes[i].begin() + 1, prefixes[i].end()}, false);
        continue;
      }
      prefixes[i].push_back(tok);
      still.push_back(i);
    }
    active = std::move(still);
  }
  for (std::size_t i : active) out[i] = finish(lm, {prefixes[i].begin() + 1, prefixes[i].end()}, true);
  return out;
}

Sample sample_headline(const LanguageModel& lm, const GenerationConfig& cfg, Rng& rng) {
  return sample_many(lm, cfg, 1, rng).front();
}

Sample sample_headline(const LanguageModel& lm, const GenerationConfig& cfg) {
  Rng rng(cfg.seed);
  return sample_headline(lm, cfg, rng);
}

Sample greedy_decode(const LanguageModel& lm, const GenerationConfig& cfg) {
  cfg.validate();
  const int eos = end_id(lm, cfg);
  const auto banned = banned_ids(lm);
  std::vector<int> prefix{lm.bos_id()};
  for (int step = 0; step < cfg.max_tokens; ++step) {
    nn::Matrix logits = lm.next_logits({prefix});
    int best = -1;
    for (int j = 0; j < logits.cols(); ++j) {
      if (std::find(banned.begin(), banned.end(), j) != banned.end()) continue;
      if (best < 0 || logits(0, j) > logits(0, best)) best = j;
    }
    if (best < 0 || best == eos) return finish(lm, {prefix.begin() + 1, prefix.end()}, false);
    prefix.push_back(best);
  }
  return finish(lm, {prefix.begin() + 1, prefix.end()}, true);
}

LMHandle finetune_lm(const std::vector<corpus::Headline>& real_headlines, const LmTrainOptions& opts,
                     const GptModel* base, const corpus::EraConfig& eras, const GptConfig& fresh_cfg,
                     FinetuneReport* report) {
  if (real_headlines.empty()) throw DataError("cannot fine-tune a generator on no headlines");
  std::set<corpus::Era> seen;
  std::set<int> years;
  std::vector<std::string> texts;
  texts.reserve(real_headlines.size());
  for (const auto& h : real_headlines) {
    if (h.source != corpus::Label::real) throw DataError("generator fine-tuning accepts real headlines only");
    auto era = eras.era_of(h.year);
    if (!era) throw DataError("era contamination: year " + std::to_string(h.year) + " belongs to no era");
    seen.insert(*era);
    years.insert(h.year);
    texts.push_back(h.text);
  }
  if (seen.size() != 1) throw DataError("era contamination: headlines span more than one era");
  const corpus::Era era = *seen.begin();

  std::unique_ptr<GptModel> model;
  Rng rng(opts.seed);
  int added = 0;
  if (base) {
    model = base->clone();
    added = model->extend_vocab(texts, 2, rng);
  } else {
    model = std::make_unique<GptModel>(
        build_vocab(texts, fresh_cfg.vocab_max, {"<bos>", "<eos>"}, fresh_cfg.vocab_min_count), fresh_cfg,
        opts.seed);
  }
  FinetuneReport local;
  local.loss_before = model->mean_loss(texts);
  local.epoch_losses = model->fit(texts, opts);
  local.loss_after = model->mean_loss(texts);

  LMHandle handle;
  handle.era = era;
  handle.manifest = {{"era", corpus::to_string(era)},
                     {"years", std::vector<int>(years.begin(), years.end())},
                     {"headlines", texts.size()},
                     {"initialization", base ? "pretrained" : "fresh"},
                     {"vocab_added", added},
                     {"vocab_size", model->vocab().size()},
                     {"vocab_hash", model->vocab().hash()},
                     {"epochs", opts.epochs},
                     {"lr", opts.lr},
                     {"batch_size", opts.batch_size},
                     {"seed", opts.seed},
                     {"loss_before", local.loss_before},
                     {"loss_after", local.loss_after},
                     {"epoch_losses", local.epoch_losses}};
  if (report) *report = local;
  handle.model = std::shared_ptr<const GptModel>(std::move(model));
  return handle;
}

void save_handle(const LMHandle& handle, const std::filesystem::path& dir) {
  const auto* gpt = dynamic_cast<const GptModel*>(handle.model.get());
  if (!gpt) throw ConfigError("only transformer generators can be saved");
  gpt->save(dir / "model");
  nlohmann::ordered_json j = handle.manifest;
  j["era"] = corpus::to_string(handle.era);
  write_file(dir / "generator.json", j.dump(2) + "\n");
}

LMHandle load_handle(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "generator.json"))
    throw ConfigError("no generator at " + dir.string());
  LMHandle handle;
  handle.manifest = nlohmann::ordered_json::parse(read_file(dir / "generator.json"));
  handle.era = corpus::parse_era(handle.manifest.at("era").get<std::string>());
  handle.model = std::shared_ptr<const GptModel>(GptModel::load(dir / "model"));
  return handle;
}

GenerationResult generate_batch(const LMHandle& lm, const GenerationConfig& cfg,
                                const std::unordered_set<std::string>& exclusion_set,
                                const corpus::EraConfig& eras) {
  cfg.validate();
  if (!lm.model) throw ConfigError("generator handle holds no model");
  GenerationResult result;
  const std::size_t budget = 4 * cfg.count + 64;
  const Date date = corpus::era_sentinel_date(lm.era, eras);
  std::unordered_set<std::string> taken;
  Rng rng(cfg.seed);
  while (result.headlines.size() < cfg.count && result.attempts < budget) {
    std::size_t want = std::min<std::size_t>({cfg.count - result.headlines.size() + 8, budget - result.attempts, 256});
    for (auto& s : sample_many(*lm.model, cfg, want, rng)) {
      if (result.headlines.size() >= cfg.count) break;
      ++result.attempts;
      if (s.hit_max_tokens) ++result.truncated;
      std::string text = normalize_headline(s.text);
      if (text.empty()) {
        ++result.rejected_empty;
        continue;
      }
      if (exclusion_set.count(text) || taken.count(text)) {
        ++result.rejected_collisions;
        continue;
      }
      taken.insert(text);
      result.headlines.push_back(corpus::make_headline(text, date, corpus::Label::generated));
    }
  }
  result.shortfall = cfg.count - result.headlines.size();
  return result;
}

}  // namespace hldet::gen
