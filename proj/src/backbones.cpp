#include "hldet/backbones.hpp"

#include <algorithm>
#include <numeric>

#include "hldet/common.hpp"
#include "hldet/nn/optim.hpp"
#include "hldet/nn/serialize.hpp"
#include "hldet/text.hpp"

namespace hldet::pre {

namespace {

nlohmann::ordered_json net_json(const nn::TransformerConfig& c) {
  return {{"layers", c.layers}, {"dim", c.dim}, {"heads", c.heads}, {"ffn", c.ffn},
          {"max_positions", c.max_positions}, {"dropout", c.dropout}};
}

nlohmann::ordered_json options_json(const PretrainOptions& o) {
  return {{"epochs", o.epochs}, {"lr", o.lr}, {"batch_size", o.batch_size}, {"seed", o.seed},
          {"distill_temperature", o.distill_temperature}, {"distill_weight", o.distill_weight}};
}

struct Padded {
  std::vector<int> ids, targets, lengths;
  int steps = 0;
};

// Batch-major padding of token sequences; targets are filled by the caller.
Padded pad_batch(const std::vector<const std::vector<int>*>& seqs, int drop_last) {
  Padded p;
  for (const auto* s : seqs) p.steps = std::max(p.steps, static_cast<int>(s->size()) - drop_last);
  p.steps = std::max(p.steps, 1);
  p.ids.assign(seqs.size() * static_cast<std::size_t>(p.steps), VocabIndex::kPad);
  p.targets.assign(p.ids.size(), -1);
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    int len = std::max(static_cast<int>(seqs[b]->size()) - drop_last, 1);
    p.lengths.push_back(len);
    for (int t = 0; t < len && t < static_cast<int>(seqs[b]->size()); ++t)
      p.ids[b * static_cast<std::size_t>(p.steps) + static_cast<std::size_t>(t)] = (*seqs[b])[static_cast<std::size_t>(t)];
  }
  return p;
}

template <typename StepFn>
std::vector<double> run_epochs(std::size_t n, const PretrainOptions& opts, Rng& rng, StepFn&& step) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> losses;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(opts.batch_size)) {
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(i),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + static_cast<std::size_t>(opts.batch_size))));
      sum += step(idx);
      ++batches;
    }
    losses.push_back(batches ? sum / static_cast<double>(batches) : 0.0);
    log_info("pretrain epoch " + std::to_string(epoch + 1) + "/" + std::to_string(opts.epochs) + " loss " +
             std::to_string(losses.back()));
  }
  return losses;
}

// Chooses masked positions (never position 0, at least one per sequence) and
// corrupts the inputs 80/10/10.
void apply_mask(Padded& p, int mask_id, int vocab, int specials, float prob, Rng& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::uniform_int_distribution<int> any(specials, std::max(specials, vocab - 1));
  const std::size_t batch = p.lengths.size();
  for (std::size_t b = 0; b < batch; ++b) {
    const int len = p.lengths[b];
    bool picked = false;
    auto mark = [&](int t) {
      auto k = b * static_cast<std::size_t>(p.steps) + static_cast<std::size_t>(t);
      p.targets[k] = p.ids[k];
      float r = u(rng);
      if (r < 0.8f) p.ids[k] = mask_id;
      else if (r < 0.9f) p.ids[k] = any(rng);
      picked = true;
    };
    for (int t = 1; t < len; ++t)
      if (u(rng) < prob) mark(t);
    if (!picked && len > 1) mark(1 + static_cast<int>(rng() % static_cast<std::uint64_t>(len - 1)));
  }
}

std::vector<int> masked_rows(const Padded& p, std::vector<int>& compact_targets) {
  std::vector<int> rows;
  compact_targets.clear();
  for (std::size_t k = 0; k < p.targets.size(); ++k)
    if (p.targets[k] >= 0) {
      rows.push_back(static_cast<int>(k));
      compact_targets.push_back(p.targets[k]);
    }
  return rows;
}

std::vector<std::vector<int>> encoder_sequences(const std::vector<std::string>& texts, const VocabIndex& vocab,
                                                int max_positions) {
  std::vector<std::vector<int>> seqs;
  seqs.reserve(texts.size());
  const int cls = vocab.id("<cls>");
  for (const auto& t : texts) {
    std::vector<int> s{cls};
    for (int id : encode_tokens(t, vocab)) {
      if (static_cast<int>(s.size()) >= max_positions) break;
      s.push_back(id);
    }
    seqs.push_back(std::move(s));
  }
  return seqs;
}

}  // namespace

nlohmann::ordered_json to_json(const AwdLstmConfig& c) {
  return {{"embed_dim", c.embed_dim},         {"hidden", c.hidden},
          {"layers", c.layers},               {"embed_dropout", c.embed_dropout},
          {"input_dropout", c.input_dropout}, {"hidden_dropout", c.hidden_dropout},
          {"weight_drop", c.weight_drop},     {"output_dropout", c.output_dropout},
          {"vocab_max", c.vocab_max},         {"vocab_min_count", c.vocab_min_count}};
}

nlohmann::ordered_json to_json(const EncoderConfig& c) {
  return {{"net", net_json(c.net)}, {"mask_prob", c.mask_prob}, {"vocab_max", c.vocab_max},
          {"vocab_min_count", c.vocab_min_count}};
}

AwdLstmConfig awd_config_from_json(const nlohmann::json& j) {
  AwdLstmConfig c;
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.layers = j.value("layers", c.layers);
  c.embed_dropout = j.value("embed_dropout", c.embed_dropout);
  c.input_dropout = j.value("input_dropout", c.input_dropout);
  c.hidden_dropout = j.value("hidden_dropout", c.hidden_dropout);
  c.weight_drop = j.value("weight_drop", c.weight_drop);
  c.output_dropout = j.value("output_dropout", c.output_dropout);
  c.vocab_max = j.value("vocab_max", c.vocab_max);
  c.vocab_min_count = j.value("vocab_min_count", c.vocab_min_count);
  return c;
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  if (j.contains("net")) {
    const auto& n = j["net"];
    c.net.layers = n.value("layers", c.net.layers);
    c.net.dim = n.value("dim", c.net.dim);
    c.net.heads = n.value("heads", c.net.heads);
    c.net.ffn = n.value("ffn", c.net.ffn);
    c.net.max_positions = n.value("max_positions", c.net.max_positions);
    c.net.dropout = n.value("dropout", c.net.dropout);
  }
  c.mask_prob = j.value("mask_prob", c.mask_prob);
  c.vocab_max = j.value("vocab_max", c.vocab_max);
  c.vocab_min_count = j.value("vocab_min_count", c.vocab_min_count);
  return c;
}

nlohmann::ordered_json to_json(const BackboneSuiteOptions& o) {
  return {{"awd", to_json(o.awd)},
          {"awd_training", options_json(o.awd_training)},
          {"encoder", to_json(o.encoder)},
          {"encoder_training", options_json(o.encoder_training)},
          {"distilled_layers", o.distilled_layers},
          {"distill_training", options_json(o.distill_training)}};
}

AwdLstmNet::AwdLstmNet(nn::ParameterSet& ps, int vocab, const AwdLstmConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.layers < 1) throw ConfigError("recurrent backbone needs at least one layer");
  emb_ = &ps.add("awd.emb", nn::uniform(vocab, cfg.embed_dim, 0.1f, rng));
  out_bias_ = &ps.add("awd.out_bias", nn::Matrix::Zero(1, vocab));
  for (int i = 0; i < cfg.layers; ++i) {
    int in = i == 0 ? cfg.embed_dim : cfg.hidden;
    int out = i + 1 == cfg.layers ? cfg.embed_dim : cfg.hidden;
    layers_.emplace_back(ps, "awd.l" + std::to_string(i), in, out, rng);
  }
}

nn::Var AwdLstmNet::encode(nn::Graph& g, std::span<const int> ids, std::span<const int> lengths, int steps) const {
  const int batch = static_cast<int>(lengths.size());
  nn::Var x = nn::embedding(g, *emb_, ids);
  x = nn::dropout(x, cfg_.embed_dropout);
  x = nn::spatial_dropout(x, batch, steps, cfg_.input_dropout);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i](g, x, lengths, steps, false, cfg_.weight_drop);
    if (i + 1 < layers_.size()) x = nn::spatial_dropout(x, batch, steps, cfg_.hidden_dropout);
  }
  return nn::spatial_dropout(x, batch, steps, cfg_.output_dropout);
}

nn::Var AwdLstmNet::decode(nn::Graph& g, nn::Var hidden) const {
  return nn::add_row(nn::matmul_nt(hidden, g.param(*emb_)), g.param(*out_bias_));
}

nn::TransformerStack make_encoder(nn::ParameterSet& ps, int vocab, const EncoderConfig& cfg, Rng& rng) {
  return nn::TransformerStack(ps, "enc", vocab, cfg.net, rng);
}

std::shared_ptr<Backbone> pretrain_awd_lstm(const std::string& id, const std::vector<std::string>& texts,
                                            const AwdLstmConfig& cfg, const PretrainOptions& opts) {
  if (texts.empty()) throw DataError("cannot pretrain on an empty corpus");
  auto b = std::make_shared<Backbone>();
  b->id = id;
  b->kind = "awd_lstm";
  b->vocab = build_vocab(texts, cfg.vocab_max, {"<bos>", "<eos>"}, cfg.vocab_min_count);
  b->config = to_json(cfg);
  Rng rng(opts.seed);
  AwdLstmNet net(b->params, b->vocab.size(), cfg, rng);
  const int bos = b->vocab.id("<bos>"), eos = b->vocab.id("<eos>");
  std::vector<std::vector<int>> seqs;
  for (const auto& t : texts) {
    std::vector<int> s{bos};
    auto ids = encode_tokens(t, b->vocab);
    s.insert(s.end(), ids.begin(), ids.end());
    s.push_back(eos);
    seqs.push_back(std::move(s));
  }
  nn::Adam adam(b->params.all(), {.lr = opts.lr, .weight_decay = 0.01f, .clip_norm = 1.0f});
  auto losses = run_epochs(seqs.size(), opts, rng, [&](const std::vector<std::size_t>& idx) {
    std::vector<const std::vector<int>*> chunk;
    for (auto i : idx) chunk.push_back(&seqs[i]);
    Padded p = pad_batch(chunk, 1);
    for (std::size_t k = 0; k < chunk.size(); ++k)
      for (int t = 0; t < p.lengths[k]; ++t)
        p.targets[k * static_cast<std::size_t>(p.steps) + static_cast<std::size_t>(t)] =
            (*chunk[k])[static_cast<std::size_t>(t) + 1];
    adam.zero_grad();
    nn::Graph g(true, &rng);
    nn::Var loss = nn::cross_entropy(net.decode(g, net.encode(g, p.ids, p.lengths, p.steps)), p.targets);
    g.backward(loss);
    adam.step();
    return static_cast<double>(loss.scalar());
  });
  b->manifest = {{"id", id}, {"kind", b->kind}, {"objective", "next-token"}, {"texts", texts.size()},
                 {"vocab_size", b->vocab.size()}, {"vocab_hash", b->vocab.hash()}, {"config", b->config},
                 {"training", options_json(opts)}, {"epoch_losses", losses}};
  return b;
}

std::shared_ptr<Backbone> pretrain_encoder(const std::string& id, const std::vector<std::string>& texts,
                                           const EncoderConfig& cfg, const PretrainOptions& opts) {
  if (texts.empty()) throw DataError("cannot pretrain on an empty corpus");
  auto b = std::make_shared<Backbone>();
  b->id = id;
  b->kind = "encoder";
  b->vocab = build_vocab(texts, cfg.vocab_max, {"<cls>", "<mask>"}, cfg.vocab_min_count);
  b->config = to_json(cfg);
  Rng rng(opts.seed);
  auto net = make_encoder(b->params, b->vocab.size(), cfg, rng);
  auto seqs = encoder_sequences(texts, b->vocab, cfg.net.max_positions);
  const int mask_id = b->vocab.id("<mask>");
  nn::Adam adam(b->params.all(), {.lr = opts.lr, .weight_decay = 0.01f, .clip_norm = 1.0f});
  auto losses = run_epochs(seqs.size(), opts, rng, [&](const std::vector<std::size_t>& idx) {
    std::vector<const std::vector<int>*> chunk;
    for (auto i : idx) chunk.push_back(&seqs[i]);
    Padded p = pad_batch(chunk, 0);
    apply_mask(p, mask_id, b->vocab.size(), b->vocab.special_count(), cfg.mask_prob, rng);
    std::vector<int> targets;
    auto rows = masked_rows(p, targets);
    if (rows.empty()) return 0.0;
    adam.zero_grad();
    nn::Graph g(true, &rng);
    nn::Var h = net(g, p.ids, p.lengths, p.steps, false);
    nn::Var loss = nn::cross_entropy(net.tied_logits(g, nn::gather_rows(h, rows)), targets);
    g.backward(loss);
    adam.step();
    return static_cast<double>(loss.scalar());
  });
  b->manifest = {{"id", id}, {"kind", b->kind}, {"objective", "masked-token"}, {"texts", texts.size()},
                 {"vocab_size", b->vocab.size()}, {"vocab_hash", b->vocab.hash()}, {"config", b->config},
                 {"training", options_json(opts)}, {"epoch_losses", losses}};
  return b;
}

std::shared_ptr<Backbone> distill_encoder(const std::string& id, const Backbone& teacher, int layers,
                                          const std::vector<std::string>& texts, const PretrainOptions& opts) {
  if (teacher.kind != "encoder") throw ConfigError("distillation needs an encoder teacher");
  if (texts.empty()) throw DataError("cannot pretrain on an empty corpus");
  EncoderConfig tcfg = encoder_config_from_json(teacher.config);
  if (layers < 1 || layers > tcfg.net.layers) throw ConfigError("student layers must be in [1, teacher layers]");
  EncoderConfig scfg = tcfg;
  scfg.net.layers = layers;

  auto b = std::make_shared<Backbone>();
  b->id = id;
  b->kind = "encoder";
  b->vocab = teacher.vocab;
  b->config = to_json(scfg);
  Rng rng(opts.seed);
  auto student = make_encoder(b->params, b->vocab.size(), scfg, rng);

  // Teacher copy used read-only for soft targets.
  nn::ParameterSet tparams;
  auto tnet = make_encoder(tparams, teacher.vocab.size(), tcfg, rng);
  nn::copy_matching(teacher.params, tparams);

  // Student block i starts from teacher block i * (teacher layers / student layers).
  nn::copy_matching(teacher.params, b->params);
  const int stride = tcfg.net.layers / layers;
  for (int i = 0; i < layers; ++i) {
    const std::string sp = "enc.block" + std::to_string(i) + ".";
    const std::string tp = "enc.block" + std::to_string(i * stride) + ".";
    for (nn::Parameter* p : b->params.with_prefix(sp))
      p->value = teacher.params.find(tp + p->name.substr(sp.size()))->value;
  }

  auto seqs = encoder_sequences(texts, b->vocab, scfg.net.max_positions);
  const int mask_id = b->vocab.id("<mask>");
  const float temp = opts.distill_temperature;
  nn::Adam adam(b->params.all(), {.lr = opts.lr, .weight_decay = 0.01f, .clip_norm = 1.0f});
  auto losses = run_epochs(seqs.size(), opts, rng, [&](const std::vector<std::size_t>& idx) {
    std::vector<const std::vector<int>*> chunk;
    for (auto i : idx) chunk.push_back(&seqs[i]);
    Padded p = pad_batch(chunk, 0);
    apply_mask(p, mask_id, b->vocab.size(), b->vocab.special_count(), scfg.mask_prob, rng);
    std::vector<int> targets;
    auto rows = masked_rows(p, targets);
    if (rows.empty()) return 0.0;
    nn::Matrix soft;
    {
      nn::Graph tg(false);
      tg.set_training(false);
      nn::Var th = tnet(tg, p.ids, p.lengths, p.steps, false);
      nn::Matrix logits = tnet.tied_logits(tg, nn::gather_rows(th, rows)).value() / temp;
      soft = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp();
      soft.array().colwise() /= soft.rowwise().sum().array();
    }
    adam.zero_grad();
    nn::Graph g(true, &rng);
    nn::Var logits = student.tied_logits(g, nn::gather_rows(student(g, p.ids, p.lengths, p.steps, false), rows));
    nn::Var hard = nn::cross_entropy(logits, targets);
    nn::Var distill = nn::scale(nn::soft_cross_entropy(nn::scale(logits, 1.0f / temp), soft), temp * temp);
    nn::Var loss = nn::add(nn::scale(distill, opts.distill_weight), nn::scale(hard, 1.0f - opts.distill_weight));
    g.backward(loss);
    adam.step();
    return static_cast<double>(loss.scalar());
  });
  b->manifest = {{"id", id}, {"kind", b->kind}, {"objective", "distillation"}, {"teacher", teacher.id},
                 {"texts", texts.size()}, {"vocab_size", b->vocab.size()}, {"vocab_hash", b->vocab.hash()},
                 {"config", b->config}, {"training", options_json(opts)}, {"epoch_losses", losses}};
  return b;
}

void save_backbone(const Backbone& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nn::save_parameters(b.params, dir / "weights.bin");
  b.vocab.save(dir / "vocab.txt");
  nlohmann::ordered_json j = {{"id", b.id}, {"kind", b.kind}, {"config", b.config}, {"manifest", b.manifest}};
  write_file(dir / "backbone.json", j.dump(2) + "\n");
}

std::shared_ptr<Backbone> load_backbone(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "backbone.json")) throw ConfigError("no pretrained backbone at " + dir.string());
  auto j = nlohmann::ordered_json::parse(read_file(dir / "backbone.json"));
  auto b = std::make_shared<Backbone>();
  b->id = j.at("id").get<std::string>();
  b->kind = j.at("kind").get<std::string>();
  b->config = j.at("config");
  b->manifest = j.value("manifest", nlohmann::ordered_json::object());
  b->vocab = VocabIndex::load(dir / "vocab.txt");
  Rng rng(0);
  if (b->kind == "awd_lstm") AwdLstmNet(b->params, b->vocab.size(), awd_config_from_json(b->config), rng);
  else if (b->kind == "encoder") make_encoder(b->params, b->vocab.size(), encoder_config_from_json(b->config), rng);
  else throw ConfigError("unknown backbone kind '" + b->kind + "'");
  nn::load_parameters(b->params, dir / "weights.bin");
  return b;
}

bool BackboneStore::has(const std::string& id) const {
  std::lock_guard lock(mu_);
  return cache_.count(id) || std::filesystem::exists(dir_ / id / "backbone.json");
}

std::shared_ptr<const Backbone> BackboneStore::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = cache_.find(id);
  if (it != cache_.end()) return it->second;
  auto b = load_backbone(dir_ / id);
  cache_[id] = b;
  return b;
}

void BackboneStore::put(std::shared_ptr<Backbone> backbone) {
  save_backbone(*backbone, dir_ / backbone->id);
  std::lock_guard lock(mu_);
  cache_[backbone->id] = std::move(backbone);
}

void build_backbones(BackboneStore& store, const std::vector<std::string>& texts, const BackboneSuiteOptions& opts,
                     std::uint64_t seed) {
  if (!store.has("awd_lstm")) {
    log_info("pretraining recurrent language model on " + std::to_string(texts.size()) + " headlines");
    auto o = opts.awd_training;
    o.seed = seed;
    store.put(pretrain_awd_lstm("awd_lstm", texts, opts.awd, o));
  }
  if (!store.has("bert")) {
    log_info("pretraining transformer encoder on " + std::to_string(texts.size()) + " headlines");
    auto o = opts.encoder_training;
    o.seed = seed + 1;
    store.put(pretrain_encoder("bert", texts, opts.encoder, o));
  }
  if (!store.has("distilbert")) {
    log_info("distilling a " + std::to_string(opts.distilled_layers) + "-layer encoder");
    auto o = opts.distill_training;
    o.seed = seed + 2;
    store.put(distill_encoder("distilbert", *store.get("bert"), opts.distilled_layers, texts, o));
  }
}

}  // namespace hldet::pre
