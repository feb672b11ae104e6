#include <fstream>

#include "hldet/classifiers.hpp"
#include "hldet/common.hpp"

namespace hldet::clf {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(NaiveBayesSpec, alpha, vocab_max)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ElasticNetSpec, l1_ratio, strengths, max_iter, vocab_max)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CnnSpec, embed_dim, filters, kernel_size, epochs, lr, batch_size,
                                                max_len, vocab_max)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BiLstmSpec, units, embed_dim, spatial_dropout, epochs, lr,
                                                batch_size, max_len, vocab_max)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BiLstmAttentionSpec, units, embed_dim, spatial_dropout, epochs, lr,
                                                batch_size, max_len, vocab_max, attention_dim)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(UlmfitStage, trainable, lr, epochs)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(UlmfitSpec, backbone, stages, head_hidden, head_dropout, batch_size,
                                                max_len)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TransformerSpec, encoder, epochs, lr, batch_size, max_len, pooling,
                                                head_dropout)

const std::vector<std::string>& spec_names() {
  static const std::vector<std::string> names{"naive_bayes", "elastic_net",  "cnn",  "bilstm",
                                              "bilstm_attention", "ulmfit", "bert", "distilbert"};
  return names;
}

std::string display_name(const std::string& name) {
  static const std::map<std::string, std::string> names{
      {"naive_bayes", "Naive Bayes"}, {"elastic_net", "Elastic Net"},
      {"cnn", "CNN"},                 {"bilstm", "Bi-LSTM"},
      {"bilstm_attention", "Bi-LSTM w/ Attention"}, {"ulmfit", "ULMFit"},
      {"bert", "BERT"},               {"distilbert", "DistilBERT"}};
  auto it = names.find(name);
  return it == names.end() ? name : it->second;
}

ClassifierSpec default_spec(const std::string& name) {
  if (name == "naive_bayes") return NaiveBayesSpec{};
  if (name == "elastic_net") return ElasticNetSpec{};
  if (name == "cnn") return CnnSpec{};
  if (name == "bilstm") return BiLstmSpec{};
  if (name == "bilstm_attention") return BiLstmAttentionSpec{};
  if (name == "ulmfit") return UlmfitSpec{};
  if (name == "bert") return TransformerSpec{};
  if (name == "distilbert") {
    TransformerSpec s;
    s.encoder = "distilbert";
    return s;
  }
  throw ConfigError("unknown classifier spec '" + name + "'");
}

std::string spec_name(const ClassifierSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, NaiveBayesSpec>) return "naive_bayes";
        else if constexpr (std::is_same_v<T, ElasticNetSpec>) return "elastic_net";
        else if constexpr (std::is_same_v<T, CnnSpec>) return "cnn";
        else if constexpr (std::is_same_v<T, BiLstmAttentionSpec>) return "bilstm_attention";
        else if constexpr (std::is_same_v<T, BiLstmSpec>) return "bilstm";
        else if constexpr (std::is_same_v<T, UlmfitSpec>) return "ulmfit";
        else return s.encoder;
      },
      spec);
}

nlohmann::ordered_json spec_to_json(const ClassifierSpec& spec) {
  nlohmann::ordered_json j = {{"name", spec_name(spec)}};
  std::visit([&j](const auto& s) { j["params"] = nlohmann::ordered_json::parse(nlohmann::json(s).dump()); }, spec);
  return j;
}

ClassifierSpec spec_from_json(const std::string& name, const nlohmann::json& overrides) {
  ClassifierSpec spec = default_spec(name);
  if (overrides.is_null()) return spec;
  if (!overrides.is_object()) throw ConfigError("overrides for '" + name + "' must be an object");
  std::visit(
      [&](auto& s) {
        using T = std::decay_t<decltype(s)>;
        nlohmann::json merged = s;
        for (const auto& [key, value] : overrides.items()) {
          if (!merged.contains(key)) throw ConfigError("unknown parameter '" + key + "' for spec '" + name + "'");
          merged[key] = value;
        }
        try {
          s = merged.get<T>();
        } catch (const nlohmann::json::exception& e) {
          throw ConfigError("bad parameters for spec '" + name + "': " + e.what());
        }
      },
      spec);
  if (auto* t = std::get_if<TransformerSpec>(&spec)) {
    if (t->pooling != "cls" && t->pooling != "mean") throw ConfigError("pooling must be 'cls' or 'mean'");
  }
  if (auto* u = std::get_if<UlmfitSpec>(&spec)) {
    for (const auto& st : u->stages)
      if (st.trainable != "lstm" && st.trainable != "all" && st.trainable != "head")
        throw ConfigError("ulmfit stage must train 'lstm', 'all' or 'head'");
  }
  return spec;
}

std::unique_ptr<TrainedModel> train(const ClassifierSpec& spec, const std::vector<LabeledExample>& train_set,
                                    const std::vector<LabeledExample>& dev, std::uint64_t seed,
                                    const TrainContext& ctx) {
  bool has_real = false, has_generated = false;
  for (const auto& e : train_set) (e.label == Label::real ? has_real : has_generated) = true;
  if (!has_real || !has_generated) throw DataError("degenerate training set");
  return std::visit(
      [&](const auto& s) -> std::unique_ptr<TrainedModel> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, NaiveBayesSpec>) return detail::train_naive_bayes(s, train_set, dev, seed, ctx);
        else if constexpr (std::is_same_v<T, ElasticNetSpec>) return detail::train_elastic_net(s, train_set, dev, seed, ctx);
        else if constexpr (std::is_same_v<T, CnnSpec>) return detail::train_cnn(s, train_set, dev, seed, ctx);
        else if constexpr (std::is_same_v<T, BiLstmAttentionSpec>)
          return detail::train_bilstm(s, true, s.attention_dim, train_set, dev, seed, ctx);
        else if constexpr (std::is_same_v<T, BiLstmSpec>) return detail::train_bilstm(s, false, 0, train_set, dev, seed, ctx);
        else if constexpr (std::is_same_v<T, UlmfitSpec>) return detail::train_ulmfit(s, train_set, dev, seed, ctx);
        else return detail::train_transformer(s, train_set, dev, seed, ctx);
      },
      spec);
}

std::vector<Prediction> predict(const TrainedModel& model, const std::vector<std::string>& texts) {
  std::vector<Prediction> out;
  if (texts.empty()) return out;
  auto scores = model.scores(texts);
  out.reserve(scores.size());
  for (double s : scores) out.push_back({s >= 0.5 ? Label::generated : Label::real, s});
  return out;
}

double accuracy(const TrainedModel& model, const std::vector<LabeledExample>& examples) {
  if (examples.empty()) return 0.0;
  auto preds = predict(model, corpus::texts_of(examples));
  std::size_t right = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) right += preds[i].label == examples[i].label;
  return static_cast<double>(right) / static_cast<double>(examples.size());
}

void save_model(const TrainedModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  model.save_weights(dir);
  nlohmann::ordered_json m = model.manifest();
  m["spec"] = spec_to_json(model.spec());
  m["seed"] = model.seed();
  write_file(dir / "manifest.json", m.dump(2) + "\n");
}

std::unique_ptr<TrainedModel> load_model(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "manifest.json")) throw ConfigError("no model at " + dir.string());
  auto m = nlohmann::ordered_json::parse(read_file(dir / "manifest.json"));
  const std::string name = m.at("spec").at("name").get<std::string>();
  ClassifierSpec spec = spec_from_json(name, m.at("spec").at("params"));
  const auto seed = m.at("seed").get<std::uint64_t>();
  std::unique_ptr<TrainedModel> model;
  if (auto* nb = std::get_if<NaiveBayesSpec>(&spec)) model = detail::load_naive_bayes(*nb, seed, dir);
  else if (auto* en = std::get_if<ElasticNetSpec>(&spec)) model = detail::load_elastic_net(*en, seed, dir);
  else model = detail::load_neural(spec, seed, dir);
  m.erase("spec");
  m.erase("seed");
  model->manifest() = m;
  return model;
}

}  // namespace hldet::clf
