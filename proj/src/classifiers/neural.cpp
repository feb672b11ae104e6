#include <algorithm>
#include <cmath>
#include <numeric>

#include "hldet/classifiers.hpp"
#include "hldet/common.hpp"
#include "hldet/nn/layers.hpp"
#include "hldet/nn/optim.hpp"
#include "hldet/nn/serialize.hpp"
#include "hldet/text.hpp"

namespace hldet::clf::detail {

namespace {

struct SeqBatch {
  std::vector<int> ids;
  std::vector<int> lengths;
  int steps = 1;
  int batch() const { return static_cast<int>(lengths.size()); }
};

SeqBatch make_batch(const std::vector<std::vector<int>>& seqs, std::span<const std::size_t> idx) {
  SeqBatch b;
  for (auto i : idx) b.steps = std::max(b.steps, static_cast<int>(seqs[i].size()));
  b.ids.assign(idx.size() * static_cast<std::size_t>(b.steps), VocabIndex::kPad);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& s = seqs[idx[r]];
    std::copy(s.begin(), s.end(), b.ids.begin() + static_cast<std::ptrdiff_t>(r * static_cast<std::size_t>(b.steps)));
    b.lengths.push_back(static_cast<int>(s.size()));
  }
  return b;
}

/// Maps a batch to one logit per example.
class Arch {
 public:
  virtual ~Arch() = default;
  virtual nn::Var logits(nn::Graph& g, const SeqBatch& b) const = 0;
};

class CnnArch final : public Arch {
 public:
  CnnArch(nn::ParameterSet& ps, int vocab, const CnnSpec& s, Rng& rng) {
    emb_ = &ps.add("cnn.emb", nn::uniform(vocab, s.embed_dim, 0.05f, rng));
    conv1_ = nn::Conv1d(ps, "cnn.conv1", s.embed_dim, s.filters[0], s.kernel_size, rng);
    conv2_ = nn::Conv1d(ps, "cnn.conv2", s.filters[0], s.filters[1], s.kernel_size, rng);
    out_ = nn::Linear(ps, "cnn.out", s.filters[1], 1, rng);
  }
  nn::Var logits(nn::Graph& g, const SeqBatch& b) const override {
    nn::Var x = nn::embedding(g, *emb_, b.ids);
    x = nn::relu(conv1_(g, x, b.batch(), b.steps));
    x = nn::relu(conv2_(g, x, b.batch(), b.steps));
    return out_(g, nn::masked_max_pool(x, b.lengths, b.steps));
  }

 private:
  nn::Parameter* emb_;
  nn::Conv1d conv1_, conv2_;
  nn::Linear out_;
};

class BiLstmArch final : public Arch {
 public:
  BiLstmArch(nn::ParameterSet& ps, int vocab, const BiLstmSpec& s, bool attention, int attention_dim, Rng& rng)
      : dropout_(s.spatial_dropout), attention_(attention) {
    emb_ = &ps.add("bilstm.emb", nn::uniform(vocab, s.embed_dim, 0.05f, rng));
    rnn_ = nn::BiLstm(ps, "bilstm.rnn", s.embed_dim, s.units, rng);
    int features = 4 * s.units;
    if (attention) {
      att_ = nn::Linear(ps, "bilstm.att", 2 * s.units, attention_dim, rng);
      att_score_ = nn::Linear(ps, "bilstm.att_score", attention_dim, 1, rng);
      features += 2 * s.units;
    }
    out_ = nn::Linear(ps, "bilstm.out", features, 1, rng);
  }
  nn::Var logits(nn::Graph& g, const SeqBatch& b) const override {
    nn::Var x = nn::embedding(g, *emb_, b.ids);
    x = nn::spatial_dropout(x, b.batch(), b.steps, dropout_);
    nn::Var h = rnn_(g, x, b.lengths, b.steps);
    std::vector<nn::Var> parts{nn::masked_mean_pool(h, b.lengths, b.steps), nn::masked_max_pool(h, b.lengths, b.steps)};
    if (attention_) {
      nn::Var scores = att_score_(g, nn::tanh(att_(g, h)));
      parts.push_back(nn::attention_pool(h, scores, b.lengths, b.steps));
    }
    return out_(g, nn::concat_cols(parts));
  }

 private:
  float dropout_;
  bool attention_;
  nn::Parameter* emb_;
  nn::BiLstm rnn_;
  nn::Linear att_, att_score_, out_;
};

class UlmfitArch final : public Arch {
 public:
  UlmfitArch(nn::ParameterSet& ps, int vocab, const pre::AwdLstmConfig& cfg, const UlmfitSpec& s, Rng& rng)
      : net_(ps, vocab, cfg, rng), head_dropout_(s.head_dropout) {
    fc1_ = nn::Linear(ps, "head.fc1", 3 * cfg.embed_dim, s.head_hidden, rng);
    fc2_ = nn::Linear(ps, "head.fc2", s.head_hidden, 1, rng);
  }
  nn::Var logits(nn::Graph& g, const SeqBatch& b) const override {
    nn::Var h = net_.encode(g, b.ids, b.lengths, b.steps);
    std::vector<int> last;
    for (int i = 0; i < b.batch(); ++i) last.push_back(i * b.steps + b.lengths[static_cast<std::size_t>(i)] - 1);
    nn::Var pooled = nn::concat_cols({nn::gather_rows(h, last), nn::masked_max_pool(h, b.lengths, b.steps),
                                      nn::masked_mean_pool(h, b.lengths, b.steps)});
    nn::Var z = nn::dropout(nn::relu(fc1_(g, pooled)), head_dropout_);
    return fc2_(g, z);
  }

 private:
  pre::AwdLstmNet net_;
  float head_dropout_;
  nn::Linear fc1_, fc2_;
};

class TransformerArch final : public Arch {
 public:
  TransformerArch(nn::ParameterSet& ps, int vocab, const pre::EncoderConfig& cfg, const TransformerSpec& s, Rng& rng)
      : net_(pre::make_encoder(ps, vocab, cfg, rng)), cls_(s.pooling == "cls"), dropout_(s.head_dropout) {
    pre_ = nn::Linear(ps, "head.pre", cfg.net.dim, cfg.net.dim, rng);
    out_ = nn::Linear(ps, "head.out", cfg.net.dim, 1, rng);
  }
  nn::Var logits(nn::Graph& g, const SeqBatch& b) const override {
    nn::Var h = net_(g, b.ids, b.lengths, b.steps, false);
    nn::Var pooled;
    if (cls_) {
      std::vector<int> first;
      for (int i = 0; i < b.batch(); ++i) first.push_back(i * b.steps);
      pooled = nn::gather_rows(h, first);
    } else {
      pooled = nn::masked_mean_pool(h, b.lengths, b.steps);
    }
    nn::Var z = nn::tanh(pre_(g, pooled));
    return out_(g, nn::dropout(z, dropout_));
  }

 private:
  nn::TransformerStack net_;
  bool cls_;
  float dropout_;
  nn::Linear pre_, out_;
};

enum class Framing { plain, lm, cls };

class NeuralModel final : public TrainedModel {
 public:
  NeuralModel(ClassifierSpec spec, std::uint64_t seed, VocabIndex vocab, int max_len, Framing framing,
              nlohmann::ordered_json arch_config)
      : TrainedModel(std::move(spec), seed),
        vocab_(std::move(vocab)),
        max_len_(max_len),
        framing_(framing),
        arch_config_(std::move(arch_config)),
        params_(std::make_unique<nn::ParameterSet>()) {}

  void build(Rng& rng) {
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, CnnSpec>)
            arch_ = std::make_unique<CnnArch>(*params_, vocab_.size(), s, rng);
          else if constexpr (std::is_same_v<T, BiLstmAttentionSpec>)
            arch_ = std::make_unique<BiLstmArch>(*params_, vocab_.size(), s, true, s.attention_dim, rng);
          else if constexpr (std::is_same_v<T, BiLstmSpec>)
            arch_ = std::make_unique<BiLstmArch>(*params_, vocab_.size(), s, false, 0, rng);
          else if constexpr (std::is_same_v<T, UlmfitSpec>)
            arch_ = std::make_unique<UlmfitArch>(*params_, vocab_.size(), pre::awd_config_from_json(arch_config_), s, rng);
          else if constexpr (std::is_same_v<T, TransformerSpec>)
            arch_ = std::make_unique<TransformerArch>(*params_, vocab_.size(), pre::encoder_config_from_json(arch_config_),
                                                      s, rng);
          else
            throw ConfigError("not a neural spec");
        },
        spec_);
  }

  std::vector<int> sequence(const std::string& text) const {
    std::vector<int> s;
    if (framing_ == Framing::lm) s.push_back(vocab_.id("<bos>"));
    if (framing_ == Framing::cls) s.push_back(vocab_.id("<cls>"));
    auto ids = encode_tokens(text, vocab_);
    if (static_cast<int>(ids.size()) > max_len_) ids.resize(static_cast<std::size_t>(max_len_));
    s.insert(s.end(), ids.begin(), ids.end());
    if (framing_ == Framing::lm) s.push_back(vocab_.id("<eos>"));
    if (s.empty()) s.push_back(VocabIndex::kUnk);
    return s;
  }

  std::vector<std::vector<int>> sequences(const std::vector<std::string>& texts) const {
    std::vector<std::vector<int>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(sequence(t));
    return out;
  }

  std::vector<double> scores(const std::vector<std::string>& texts) const override {
    auto seqs = sequences(texts);
    std::vector<double> out;
    out.reserve(texts.size());
    constexpr std::size_t kChunk = 256;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < seqs.size(); i += kChunk) {
      idx.resize(std::min(kChunk, seqs.size() - i));
      std::iota(idx.begin(), idx.end(), i);
      SeqBatch b = make_batch(seqs, idx);
      nn::Graph g(false);
      g.set_training(false);
      const nn::Matrix& z = arch_->logits(g, b).value();
      for (Eigen::Index r = 0; r < z.rows(); ++r) out.push_back(1.0 / (1.0 + std::exp(-static_cast<double>(z(r, 0)))));
    }
    return out;
  }

  void save_weights(const std::filesystem::path& dir) const override {
    std::filesystem::create_directories(dir);
    nn::save_parameters(*params_, dir / "weights.bin");
    vocab_.save(dir / "vocab.txt");
    nlohmann::ordered_json j = {{"max_len", max_len_}, {"framing", static_cast<int>(framing_)},
                                {"arch_config", arch_config_}};
    write_file(dir / "arch.json", j.dump(2) + "\n");
  }

  nn::ParameterSet& params() { return *params_; }
  std::size_t params_count() const { return params_->count(); }
  const Arch& arch() const { return *arch_; }
  const VocabIndex& vocab() const { return vocab_; }

 private:
  VocabIndex vocab_;
  int max_len_;
  Framing framing_;
  nlohmann::ordered_json arch_config_;
  std::unique_ptr<nn::ParameterSet> params_;
  std::unique_ptr<Arch> arch_;
};

struct StageOptions {
  std::string name;
  nn::AdamConfig adam;
  int epochs = 1;
  int batch_size = 32;
  enum class Schedule { constant, linear_decay, one_cycle } schedule = Schedule::constant;
};

// Learning-rate multiplier at training progress p in [0, 1).
double schedule_factor(StageOptions::Schedule s, double p) {
  switch (s) {
    case StageOptions::Schedule::constant:
      return 1.0;
    case StageOptions::Schedule::linear_decay:
      return 1.0 - p;
    case StageOptions::Schedule::one_cycle: {
      // Cosine warm-up from 1/25 over the first quarter, then cosine decay to 1/25 * 1e-4.
      constexpr double kStart = 1.0 / 25.0, kEnd = kStart * 1e-4, kWarm = 0.25;
      auto cosine = [](double from, double to, double t) { return to + (from - to) * (1.0 + std::cos(M_PI * t)) / 2.0; };
      return p < kWarm ? cosine(kStart, 1.0, p / kWarm) : cosine(1.0, kEnd, (p - kWarm) / (1.0 - kWarm));
    }
  }
  return 1.0;
}

std::string schedule_name(StageOptions::Schedule s) {
  switch (s) {
    case StageOptions::Schedule::constant:
      return "constant";
    case StageOptions::Schedule::linear_decay:
      return "linear decay to zero";
    case StageOptions::Schedule::one_cycle:
      return "one-cycle (cosine warm-up over 25%, cosine annealing)";
  }
  return "";
}

std::vector<float> targets_of(const std::vector<LabeledExample>& ex) {
  std::vector<float> y;
  y.reserve(ex.size());
  for (const auto& e : ex) y.push_back(e.label == Label::generated ? 1.0f : 0.0f);
  return y;
}

nlohmann::ordered_json adam_json(const nn::AdamConfig& c) {
  return {{"optimizer", "adam"}, {"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps},
          {"weight_decay", c.weight_decay}, {"clip_norm", c.clip_norm}};
}

// Trains the currently trainable parameters; returns one log entry per epoch.
nlohmann::ordered_json fit_stage(NeuralModel& model, const std::vector<std::vector<int>>& seqs,
                                 const std::vector<float>& y, const std::vector<LabeledExample>& dev,
                                 const StageOptions& opt, Rng& rng, const TrainContext& ctx) {
  nn::Adam adam(model.params().all(), opt.adam);
  std::vector<std::size_t> order(seqs.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = static_cast<std::size_t>(std::max(1, opt.batch_size));
  const std::size_t steps_per_epoch = (seqs.size() + bs - 1) / bs;
  const double total_steps = static_cast<double>(steps_per_epoch * static_cast<std::size_t>(opt.epochs));
  std::size_t step = 0;
  nlohmann::ordered_json log = nlohmann::ordered_json::array();
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < order.size(); i += bs) {
      std::span<const std::size_t> idx(order.data() + i, std::min(bs, order.size() - i));
      SeqBatch b = make_batch(seqs, idx);
      std::vector<float> t;
      for (auto k : idx) t.push_back(y[k]);
      adam.set_lr(static_cast<float>(opt.adam.lr * schedule_factor(opt.schedule, static_cast<double>(step) / total_steps)));
      adam.zero_grad();
      nn::Graph g(true, &rng);
      nn::Var loss = nn::bce_with_logits(model.arch().logits(g, b), t);
      g.backward(loss);
      adam.step();
      loss_sum += loss.scalar() * static_cast<double>(idx.size());
      ++step;
    }
    const double train_loss = seqs.empty() ? 0.0 : loss_sum / static_cast<double>(seqs.size());
    const double dev_acc = accuracy(model, dev);
    log.push_back({{"stage", opt.name}, {"epoch", epoch + 1}, {"train_loss", train_loss}, {"dev_accuracy", dev_acc}});
    if (ctx.progress)
      ctx.progress(spec_name(model.spec()) + " " + opt.name + " epoch " + std::to_string(epoch + 1) + " loss " +
                   std::to_string(train_loss) + " dev acc " + std::to_string(dev_acc));
  }
  return log;
}

nlohmann::ordered_json base_manifest(const NeuralModel& m, const std::string& family) {
  return {{"family", family}, {"vocab_size", m.vocab().size()}, {"vocab_hash", m.vocab().hash()},
          {"parameters", m.params_count()}};
}

std::shared_ptr<const pre::Backbone> resolve_backbone(const std::string& id, const std::vector<LabeledExample>& train,
                                                      std::uint64_t seed, const TrainContext& ctx,
                                                      std::string& origin) {
  if (ctx.backbones) {
    origin = "store";
    return ctx.backbones->get(id);
  }
  origin = "pretrained on training texts";
  auto texts = corpus::texts_of(train);
  const auto& f = ctx.fallback;
  if (id == "awd_lstm") {
    auto o = f.awd_training;
    o.seed = seed;
    return pre::pretrain_awd_lstm(id, texts, f.awd, o);
  }
  auto o = f.encoder_training;
  o.seed = seed;
  auto teacher = pre::pretrain_encoder("bert", texts, f.encoder, o);
  if (id == "bert") return teacher;
  if (id == "distilbert") {
    auto d = f.distill_training;
    d.seed = seed + 1;
    return pre::distill_encoder(id, *teacher, f.distilled_layers, texts, d);
  }
  throw ConfigError("unknown backbone '" + id + "'");
}

}  // namespace

std::unique_ptr<TrainedModel> train_cnn(const CnnSpec& spec, const std::vector<LabeledExample>& train,
                                        const std::vector<LabeledExample>& dev, std::uint64_t seed,
                                        const TrainContext& ctx) {
  Rng rng(seed);
  auto model = std::make_unique<NeuralModel>(spec, seed, build_vocab(corpus::texts_of(train), spec.vocab_max),
                                             spec.max_len, Framing::plain, nlohmann::ordered_json::object());
  model->build(rng);
  StageOptions opt{.name = "fit", .adam = {.lr = spec.lr}, .epochs = spec.epochs, .batch_size = spec.batch_size};
  auto log = fit_stage(*model, model->sequences(corpus::texts_of(train)), targets_of(train), dev, opt, rng, ctx);
  auto m = base_manifest(*model, "convolutional");
  m["training"] = adam_json(opt.adam);
  m["batch_size"] = opt.batch_size;
  m["loss"] = "binary cross-entropy";
  m["epochs"] = log;
  model->manifest() = m;
  return model;
}

std::unique_ptr<TrainedModel> train_bilstm(const BiLstmSpec& spec, bool attention, int attention_dim,
                                           const std::vector<LabeledExample>& train,
                                           const std::vector<LabeledExample>& dev, std::uint64_t seed,
                                           const TrainContext& ctx) {
  Rng rng(seed);
  ClassifierSpec full = spec;
  if (attention) {
    BiLstmAttentionSpec a;
    static_cast<BiLstmSpec&>(a) = spec;
    a.attention_dim = attention_dim;
    full = a;
  }
  auto model = std::make_unique<NeuralModel>(full, seed, build_vocab(corpus::texts_of(train), spec.vocab_max),
                                             spec.max_len, Framing::plain, nlohmann::ordered_json::object());
  model->build(rng);
  StageOptions opt{.name = "fit", .adam = {.lr = spec.lr}, .epochs = spec.epochs, .batch_size = spec.batch_size};
  auto log = fit_stage(*model, model->sequences(corpus::texts_of(train)), targets_of(train), dev, opt, rng, ctx);
  auto m = base_manifest(*model, attention ? "bidirectional lstm with additive self-attention" : "bidirectional lstm");
  m["spatial_dropout_placement"] = "embeddings";
  m["pooling"] = attention ? "mean, max, attention context" : "mean, max";
  m["training"] = adam_json(opt.adam);
  m["batch_size"] = opt.batch_size;
  m["loss"] = "binary cross-entropy";
  m["epochs"] = log;
  model->manifest() = m;
  return model;
}

std::unique_ptr<TrainedModel> train_ulmfit(const UlmfitSpec& spec, const std::vector<LabeledExample>& train,
                                           const std::vector<LabeledExample>& dev, std::uint64_t seed,
                                           const TrainContext& ctx) {
  std::string origin;
  auto backbone = resolve_backbone(spec.backbone, train, seed, ctx, origin);
  if (backbone->kind != "awd_lstm") throw ConfigError("ulmfit needs a recurrent backbone, got '" + backbone->kind + "'");
  Rng rng(seed);
  auto model = std::make_unique<NeuralModel>(spec, seed, backbone->vocab, spec.max_len, Framing::lm, backbone->config);
  model->build(rng);
  nn::copy_matching(backbone->params, model->params());
  auto seqs = model->sequences(corpus::texts_of(train));
  auto y = targets_of(train);
  nlohmann::ordered_json log = nlohmann::ordered_json::array(), stages = nlohmann::ordered_json::array();
  for (const auto& st : spec.stages) {
    auto& ps = model->params();
    if (st.trainable == "all") {
      ps.set_trainable(true);
    } else {
      ps.set_trainable(false);
      ps.set_trainable(st.trainable == "lstm" ? "awd.l" : "head.", true);
    }
    StageOptions opt{.name = st.trainable,
                     .adam = {.lr = st.lr, .beta1 = 0.9f, .beta2 = 0.99f, .eps = 1e-5f, .weight_decay = 0.01f,
                              .clip_norm = 1.0f},
                     .epochs = st.epochs,
                     .batch_size = spec.batch_size,
                     .schedule = StageOptions::Schedule::one_cycle};
    for (auto& e : fit_stage(*model, seqs, y, dev, opt, rng, ctx)) log.push_back(e);
    nlohmann::ordered_json sj = adam_json(opt.adam);
    sj["trainable"] = st.trainable;
    sj["schedule"] = schedule_name(opt.schedule);
    sj["epochs"] = st.epochs;
    stages.push_back(sj);
  }
  model->params().set_trainable(true);
  auto m = base_manifest(*model, "pretrained recurrent language model with concat-pooling head");
  m["backbone"] = {{"id", backbone->id}, {"origin", origin}, {"vocab_hash", backbone->vocab.hash()}};
  m["stages"] = stages;
  m["batch_size"] = spec.batch_size;
  m["loss"] = "binary cross-entropy";
  m["epochs"] = log;
  model->manifest() = m;
  return model;
}

std::unique_ptr<TrainedModel> train_transformer(const TransformerSpec& spec, const std::vector<LabeledExample>& train,
                                                const std::vector<LabeledExample>& dev, std::uint64_t seed,
                                                const TrainContext& ctx) {
  std::string origin;
  auto backbone = resolve_backbone(spec.encoder, train, seed, ctx, origin);
  if (backbone->kind != "encoder") throw ConfigError("transformer spec needs an encoder backbone, got '" + backbone->kind + "'");
  const auto cfg = pre::encoder_config_from_json(backbone->config);
  const int max_len = std::min(spec.max_len, cfg.net.max_positions - 1);
  Rng rng(seed);
  auto model = std::make_unique<NeuralModel>(spec, seed, backbone->vocab, max_len, Framing::cls, backbone->config);
  model->build(rng);
  nn::copy_matching(backbone->params, model->params());
  StageOptions opt{.name = "fine-tune",
                   .adam = {.lr = spec.lr, .beta1 = 0.9f, .beta2 = 0.999f, .eps = 1e-8f, .clip_norm = 1.0f},
                   .epochs = spec.epochs,
                   .batch_size = spec.batch_size,
                   .schedule = StageOptions::Schedule::linear_decay};
  auto log = fit_stage(*model, model->sequences(corpus::texts_of(train)), targets_of(train), dev, opt, rng, ctx);
  auto m = base_manifest(*model, "pretrained transformer encoder");
  m["backbone"] = {{"id", backbone->id}, {"origin", origin}, {"vocab_hash", backbone->vocab.hash()},
                   {"layers", cfg.net.layers}, {"dim", cfg.net.dim}};
  m["training"] = adam_json(opt.adam);
  m["schedule"] = schedule_name(opt.schedule);
  m["batch_size"] = opt.batch_size;
  m["loss"] = "binary cross-entropy";
  m["epochs"] = log;
  model->manifest() = m;
  return model;
}

std::unique_ptr<TrainedModel> load_neural(const ClassifierSpec& spec, std::uint64_t seed,
                                          const std::filesystem::path& dir) {
  auto j = nlohmann::ordered_json::parse(read_file(dir / "arch.json"));
  auto model = std::make_unique<NeuralModel>(spec, seed, VocabIndex::load(dir / "vocab.txt"), j.at("max_len").get<int>(),
                                             static_cast<Framing>(j.at("framing").get<int>()), j.at("arch_config"));
  Rng rng(0);
  model->build(rng);
  nn::load_parameters(model->params(), dir / "weights.bin");
  return model;
}

}  // namespace hldet::clf::detail
