#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <json.hpp>

#include "hldet/generator.hpp"
#include "hldet/nn/layers.hpp"
#include "hldet/nn/optim.hpp"
#include "hldet/nn/serialize.hpp"
#include "hldet/text.hpp"

namespace hldet::gen {

namespace {

nn::TransformerConfig net_config(const GptConfig& c) {
  return {.layers = c.layers, .dim = c.dim, .heads = c.heads, .ffn = c.ffn,
          .max_positions = c.max_positions, .dropout = c.dropout};
}

nlohmann::json config_json(const GptConfig& c) {
  return {{"dim", c.dim},           {"layers", c.layers},   {"heads", c.heads},
          {"ffn", c.ffn},           {"max_positions", c.max_positions},
          {"dropout", c.dropout},   {"vocab_max", c.vocab_max}, {"vocab_min_count", c.vocab_min_count}};
}

GptConfig config_from(const nlohmann::json& j) {
  GptConfig c;
  c.dim = j.at("dim");
  c.layers = j.at("layers");
  c.heads = j.at("heads");
  c.ffn = j.at("ffn");
  c.max_positions = j.at("max_positions");
  c.dropout = j.at("dropout");
  c.vocab_max = j.value("vocab_max", c.vocab_max);
  c.vocab_min_count = j.value("vocab_min_count", c.vocab_min_count);
  return c;
}

// Batch of teacher-forcing sequences laid out batch-major.
struct LmBatch {
  std::vector<int> ids, targets, lengths;
  int steps = 0;
};

LmBatch make_batch(const std::vector<std::vector<int>>& seqs) {
  LmBatch b;
  for (const auto& s : seqs) b.steps = std::max(b.steps, static_cast<int>(s.size()) - 1);
  b.steps = std::max(b.steps, 1);
  for (const auto& s : seqs) {
    int len = static_cast<int>(s.size()) - 1;
    b.lengths.push_back(std::max(len, 1));
    for (int t = 0; t < b.steps; ++t) {
      b.ids.push_back(t < len ? s[static_cast<std::size_t>(t)] : VocabIndex::kPad);
      b.targets.push_back(t < len ? s[static_cast<std::size_t>(t) + 1] : -1);
    }
  }
  return b;
}

}  // namespace

struct GptModel::Impl {
  nn::ParameterSet params;
  nn::TransformerStack stack;
};

GptModel::GptModel(VocabIndex vocab, GptConfig cfg, std::uint64_t seed)
    : vocab_(std::move(vocab)), cfg_(cfg), impl_(std::make_unique<Impl>()) {
  if (vocab_.id("<bos>") == VocabIndex::kUnk || vocab_.id("<eos>") == VocabIndex::kUnk)
    throw std::invalid_argument("GptModel vocabulary needs <bos> and <eos>");
  Rng rng(seed);
  impl_->stack = nn::TransformerStack(impl_->params, "gpt", vocab_.size(), net_config(cfg_), rng);
}

GptModel::~GptModel() = default;
GptModel::GptModel(GptModel&&) noexcept = default;

int GptModel::bos_id() const { return vocab_.id("<bos>"); }
int GptModel::eos_id() const { return vocab_.id("<eos>"); }
nn::ParameterSet& GptModel::parameters() { return impl_->params; }

std::vector<int> GptModel::to_sequence(const std::string& text) const {
  std::vector<int> seq{bos_id()};
  for (int id : encode_tokens(text, vocab_)) {
    if (static_cast<int>(seq.size()) + 1 >= cfg_.max_positions + 1) break;
    seq.push_back(id);
  }
  seq.push_back(eos_id());
  return seq;
}

nn::Matrix GptModel::next_logits(const std::vector<std::vector<int>>& prefixes) const {
  const int batch = static_cast<int>(prefixes.size());
  int steps = 1;
  for (const auto& p : prefixes) steps = std::max(steps, std::min<int>(static_cast<int>(p.size()), cfg_.max_positions));
  std::vector<int> ids(static_cast<std::size_t>(batch * steps), VocabIndex::kPad), lengths, last;
  for (int b = 0; b < batch; ++b) {
    const auto& p = prefixes[static_cast<std::size_t>(b)];
    int len = std::min<int>(static_cast<int>(p.size()), cfg_.max_positions);
    int offset = static_cast<int>(p.size()) - len;
    for (int t = 0; t < len; ++t) ids[static_cast<std::size_t>(b * steps + t)] = p[static_cast<std::size_t>(offset + t)];
    lengths.push_back(std::max(len, 1));
    last.push_back(b * steps + std::max(len, 1) - 1);
  }
  nn::Graph g(false);
  g.set_training(false);
  nn::Var h = impl_->stack(g, ids, lengths, steps, true);
  return impl_->stack.tied_logits(g, nn::gather_rows(h, last)).value();
}

double GptModel::mean_loss(const std::vector<std::string>& texts) const {
  double total = 0.0;
  std::size_t tokens = 0;
  constexpr std::size_t kChunk = 128;
  for (std::size_t i = 0; i < texts.size(); i += kChunk) {
    std::vector<std::vector<int>> seqs;
    for (std::size_t j = i; j < std::min(texts.size(), i + kChunk); ++j) seqs.push_back(to_sequence(texts[j]));
    auto b = make_batch(seqs);
    nn::Graph g(false);
    g.set_training(false);
    nn::Var h = impl_->stack(g, b.ids, b.lengths, b.steps, true);
    nn::Var loss = nn::cross_entropy(impl_->stack.tied_logits(g, h), b.targets);
    std::size_t n = static_cast<std::size_t>(std::count_if(b.targets.begin(), b.targets.end(), [](int t) { return t >= 0; }));
    total += static_cast<double>(loss.scalar()) * static_cast<double>(n);
    tokens += n;
  }
  return tokens ? total / static_cast<double>(tokens) : 0.0;
}

std::vector<double> GptModel::fit(const std::vector<std::string>& texts, const LmTrainOptions& opts) {
  Rng rng(opts.seed);
  nn::Adam adam(impl_->params.all(), {.lr = opts.lr, .weight_decay = 0.01f, .clip_norm = 1.0f});
  std::vector<std::vector<int>> seqs;
  seqs.reserve(texts.size());
  for (const auto& t : texts) seqs.push_back(to_sequence(t));
  std::vector<std::size_t> order(seqs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> losses;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(opts.batch_size)) {
      std::vector<std::vector<int>> chunk;
      for (std::size_t j = i; j < std::min(order.size(), i + static_cast<std::size_t>(opts.batch_size)); ++j)
        chunk.push_back(seqs[order[j]]);
      auto b = make_batch(chunk);
      adam.zero_grad();
      nn::Graph g(true, &rng);
      nn::Var h = impl_->stack(g, b.ids, b.lengths, b.steps, true);
      nn::Var loss = nn::cross_entropy(impl_->stack.tied_logits(g, h), b.targets);
      g.backward(loss);
      adam.step();
      sum += loss.scalar();
      ++batches;
    }
    losses.push_back(batches ? sum / static_cast<double>(batches) : 0.0);
    log_info("language model epoch " + std::to_string(epoch + 1) + "/" + std::to_string(opts.epochs) + " loss " +
             std::to_string(losses.back()));
  }
  return losses;
}

int GptModel::extend_vocab(const std::vector<std::string>& texts, int min_count, Rng& rng) {
  std::map<std::string, int> counts;
  for (const auto& t : texts)
    for (auto& tok : tokenize(t))
      if (!vocab_.contains(tok)) ++counts[tok];
  int added = 0;
  for (const auto& [tok, n] : counts)
    if (n >= min_count) {
      vocab_.add(tok);
      ++added;
    }
  if (added) impl_->stack.grow_vocab(vocab_.size(), rng);
  return added;
}

std::unique_ptr<GptModel> GptModel::clone() const {
  auto copy = std::make_unique<GptModel>(vocab_, cfg_, 0);
  nn::copy_matching(impl_->params, copy->impl_->params);
  return copy;
}

void GptModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nn::save_parameters(impl_->params, dir / "weights.bin");
  vocab_.save(dir / "vocab.txt");
  write_file(dir / "config.json", config_json(cfg_).dump(2) + "\n");
}

std::unique_ptr<GptModel> GptModel::load(const std::filesystem::path& dir) {
  auto cfg = config_from(nlohmann::json::parse(read_file(dir / "config.json")));
  auto model = std::make_unique<GptModel>(VocabIndex::load(dir / "vocab.txt"), cfg, 0);
  nn::load_parameters(model->impl_->params, dir / "weights.bin");
  return model;
}

std::unique_ptr<GptModel> pretrain_lm(const std::vector<std::string>& texts, const GptConfig& cfg,
                                      const LmTrainOptions& opts) {
  if (texts.empty()) throw DataError("cannot pretrain a language model on no text");
  auto vocab = build_vocab(texts, cfg.vocab_max, {"<bos>", "<eos>"}, cfg.vocab_min_count);
  auto model = std::make_unique<GptModel>(std::move(vocab), cfg, opts.seed);
  model->fit(texts, opts);
  return model;
}

}  // namespace hldet::gen
