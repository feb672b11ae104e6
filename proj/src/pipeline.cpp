#include "hldet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "hldet/backbones.hpp"
#include "hldet/common.hpp"
#include "hldet/generator.hpp"
#include "hldet/synth.hpp"
#include "hldet/text.hpp"

namespace hldet::app {

namespace fs = std::filesystem;
using corpus::Headline;
using nlohmann::ordered_json;

namespace {

std::string fingerprint(std::initializer_list<std::string> parts) {
  Fnv1a h;
  for (const auto& p : parts) {
    h.update(p);
    h.update_u64(p.size());
  }
  return h.hex();
}

std::string dump(const ordered_json& j) { return j.dump(); }

/// True when `manifest` exists and records the same input fingerprint.
bool is_current(const fs::path& manifest, const std::string& inputs) {
  if (!fs::exists(manifest)) return false;
  try {
    auto j = nlohmann::json::parse(read_file(manifest));
    return j.value("inputs", std::string{}) == inputs;
  } catch (const nlohmann::json::exception&) {
    return false;
  }
}

void write_json(const fs::path& path, const ordered_json& j) { write_file(path, j.dump(2) + "\n"); }

corpus::EraConfig eras_of(const PipelineConfig& cfg) {
  return {.defender_years = cfg.data.defender_years, .attacker_years = cfg.data.attacker_years};
}

std::vector<Headline> sample_era(std::vector<Headline> pool, std::size_t n, std::uint64_t seed) {
  corpus::dedup_in_place(pool);
  if (n == 0 || pool.size() <= n) return pool;
  Rng rng(seed);
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  // Partial Fisher-Yates, then restore corpus order among the chosen rows.
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<Headline> out;
  out.reserve(n);
  for (auto i : idx) out.push_back(std::move(pool[i]));
  return out;
}

std::vector<std::string> texts_of(const std::vector<Headline>& hs) {
  std::vector<std::string> out;
  out.reserve(hs.size());
  for (const auto& h : hs) out.push_back(h.text);
  return out;
}

std::string hash_texts(const std::vector<std::string>& texts) {
  Fnv1a h;
  for (const auto& t : texts) {
    h.update(t);
    h.update("\n");
  }
  return h.hex();
}

bool needs_backbones(const std::vector<std::string>& specs) {
  return std::any_of(specs.begin(), specs.end(),
                     [](const std::string& s) { return s == "ulmfit" || s == "bert" || s == "distilbert"; });
}

std::string data_inputs(const PipelineConfig& cfg) {
  return fingerprint({std::to_string(cfg.seed), dump(to_json(cfg)["data"])});
}

}  // namespace

Layout layout(const PipelineConfig& cfg) { return Layout{cfg.out_dir()}; }

void write_config_snapshot(const PipelineConfig& cfg) {
  cfg.validate();
  write_json(layout(cfg).config_snapshot(), to_json(cfg));
}

CorpusPartition prepare_corpus(const PipelineConfig& cfg) {
  const Layout L = layout(cfg);
  fs::path csv;
  if (!cfg.data.corpus.empty()) {
    csv = cfg.data.corpus;
    if (!fs::exists(csv)) throw DataError("corpus not found: " + csv.string());
  } else {
    csv = L.corpus_dir() / "synthetic_corpus.csv";
    synth::SynthConfig sc{.first_year = cfg.data.synth_first_year,
                          .last_year = cfg.data.synth_last_year,
                          .per_year = cfg.data.synth_per_year,
                          .seed = cfg.data.synth_seed};
    const std::string inputs = fingerprint({dump(to_json(cfg)["data"])});
    const fs::path manifest = L.corpus_dir() / "manifest.json";
    if (!fs::exists(csv) || !is_current(manifest, inputs)) {
      log_info("synthesizing corpus " + std::to_string(sc.first_year) + "-" + std::to_string(sc.last_year));
      fs::create_directories(L.corpus_dir());
      synth::write_corpus(csv, sc);
      write_json(manifest, ordered_json{{"inputs", inputs}, {"corpus", csv.filename().string()},
                                        {"sha", hash_file(csv)}});
    }
  }

  auto loaded = corpus::load_corpus(csv);
  const auto eras = eras_of(cfg);
  auto split = corpus::temporal_split(loaded.headlines, eras);

  CorpusPartition part;
  part.corpus_hash = hash_file(csv);
  part.rejected_rows = loaded.rejects.size();
  part.defender_real = sample_era(std::move(split.defender), cfg.data.defender_real, cfg.seed);
  part.attacker_real = sample_era(std::move(split.attacker), cfg.data.attacker_real, cfg.seed + 1);
  if (part.defender_real.empty()) throw DataError("no real headlines in the defender era");
  if (part.attacker_real.empty()) throw DataError("no real headlines in the attacker era");
  corpus::dedup_in_place(split.other);
  part.background = texts_of(split.other);
  part.all_real_texts.reserve(loaded.headlines.size());
  for (const auto& h : loaded.headlines) part.all_real_texts.push_back(h.text);
  return part;
}

GeneratedSets run_generate(const PipelineConfig& cfg, const CorpusPartition& part) {
  const Layout L = layout(cfg);
  const auto eras = eras_of(cfg);
  const auto& g = cfg.generator;
  const fs::path dir = L.generator_dir();
  const fs::path manifest_path = dir / "manifest.json";
  const std::string inputs = fingerprint({data_inputs(cfg), part.corpus_hash, dump(to_json(cfg)["generator"])});

  GeneratedSets out;
  if (is_current(manifest_path, inputs)) {
    log_info("reusing generated headlines in " + dir.string());
    out.defender = corpus::load_corpus(dir / "defender_generated.csv", corpus::CorpusFormat::csv,
                                       corpus::Label::generated)
                       .headlines;
    out.attacker = corpus::load_corpus(dir / "attacker_generated.csv", corpus::CorpusFormat::csv,
                                       corpus::Label::generated)
                       .headlines;
    for (auto& h : out.defender) h.year = eras.defender_years.front();
    for (auto& h : out.attacker) h.year = eras.attacker_years.front();
    out.manifest = ordered_json::parse(read_file(manifest_path));
    return out;
  }

  fs::create_directories(dir);
  std::unique_ptr<gen::GptModel> base;
  std::vector<double> pretrain_losses;
  if (!part.background.empty() && g.pretrain_epochs > 0) {
    log_info("pretraining generator on " + std::to_string(part.background.size()) + " background headlines");
    base = gen::pretrain_lm(part.background, g.model,
                            {.epochs = g.pretrain_epochs, .lr = g.pretrain_lr, .batch_size = g.batch_size,
                             .seed = cfg.seed + 11});
  }

  const std::unordered_set<std::string> exclusion(part.all_real_texts.begin(), part.all_real_texts.end());
  ordered_json eras_json = ordered_json::object();
  auto run_era = [&](corpus::Era era, const std::vector<Headline>& real, std::size_t count, std::uint64_t seed) {
    const std::string name(corpus::to_string(era));
    log_info("fine-tuning " + name + " generator on " + std::to_string(real.size()) + " headlines");
    gen::FinetuneReport report;
    auto handle = gen::finetune_lm(real,
                                   {.epochs = g.finetune_epochs, .lr = g.finetune_lr, .batch_size = g.batch_size,
                                    .seed = seed},
                                   base.get(), eras, g.model, &report);
    save_handle(handle, dir / name);
    log_info("sampling " + std::to_string(count) + " " + name + " headlines");
    gen::GenerationConfig gc{.temperature = g.temperature, .max_tokens = g.max_tokens, .seed = seed + 1,
                             .count = count};
    auto result = gen::generate_batch(handle, gc, exclusion, eras);
    corpus::write_corpus_csv(dir / (name + "_generated.csv"), result.headlines);
    eras_json[name] = ordered_json{{"finetune", handle.manifest},
                                   {"requested", count},
                                   {"produced", result.headlines.size()},
                                   {"attempts", result.attempts},
                                   {"rejected_collisions", result.rejected_collisions},
                                   {"rejected_empty", result.rejected_empty},
                                   {"truncated", result.truncated},
                                   {"shortfall", result.shortfall},
                                   {"sha", hash_file(dir / (name + "_generated.csv"))}};
    return std::move(result.headlines);
  };

  const auto defender_count =
      static_cast<std::size_t>(std::llround(static_cast<double>(part.defender_real.size()) * cfg.data.balance_ratio));
  out.defender = run_era(corpus::Era::defender, part.defender_real, defender_count, cfg.seed + 21);
  out.attacker = run_era(corpus::Era::attacker, part.attacker_real, part.attacker_real.size(), cfg.seed + 31);

  out.manifest = ordered_json{{"inputs", inputs},
                              {"background_headlines", part.background.size()},
                              {"pretrained", base != nullptr},
                              {"eras", eras_json}};
  write_json(manifest_path, out.manifest);
  return out;
}

corpus::DatasetBundle run_build(const PipelineConfig& cfg) {
  write_config_snapshot(cfg);
  const Layout L = layout(cfg);
  const auto part = prepare_corpus(cfg);
  const auto generated = run_generate(cfg, part);

  const std::string inputs = fingerprint({data_inputs(cfg), part.corpus_hash, dump(generated.manifest)});
  const fs::path manifest_path = L.dataset_dir() / "manifest.json";
  if (is_current(manifest_path, inputs) && fs::exists(L.dataset_jsonl())) {
    log_info("reusing dataset in " + L.dataset_dir().string());
    return load_built_dataset(cfg);
  }

  auto bundle = corpus::build_dataset(part.defender_real, generated.defender, part.attacker_real, generated.attacker,
                                      {.seed = cfg.seed, .balance_ratio = cfg.data.balance_ratio});
  fs::create_directories(L.dataset_dir());
  corpus::write_dataset_jsonl(L.dataset_jsonl(), bundle);

  const auto& m = bundle.metadata;
  ordered_json counts = ordered_json::object();
  for (const auto& [k, v] : m.counts) counts[k] = v;
  ordered_json manifest{{"inputs", inputs},
                        {"seed", bundle.seed},
                        {"corpus_sha", part.corpus_hash},
                        {"rejected_rows", part.rejected_rows},
                        {"defender_years", cfg.data.defender_years},
                        {"attacker_years", cfg.data.attacker_years},
                        {"counts", counts},
                        {"defender_pool_before_balance", m.defender_pool_before_balance},
                        {"balance_dropped", m.balance_dropped},
                        {"duplicates_removed", m.duplicates_removed},
                        {"conflicts_removed", m.conflicts_removed},
                        {"test_overlap_removed", m.test_overlap_removed},
                        {"balance_ratio", m.balance_ratio ? ordered_json(*m.balance_ratio) : ordered_json(nullptr)},
                        {"dataset_hash", bundle.hash()},
                        {"dataset_sha", hash_file(L.dataset_jsonl())}};
  write_json(manifest_path, manifest);
  log_info("dataset: train " + std::to_string(bundle.train.size()) + ", dev " + std::to_string(bundle.dev.size()) +
           ", test " + std::to_string(bundle.test.size()));
  return bundle;
}

corpus::DatasetBundle load_built_dataset(const PipelineConfig& cfg) {
  const Layout L = layout(cfg);
  if (!fs::exists(L.dataset_jsonl())) throw ConfigError("dataset not built; run `hldet build` first");
  auto bundle = corpus::read_dataset_jsonl(L.dataset_jsonl());
  bundle.seed = cfg.seed;
  return bundle;
}

std::vector<analysis::ComparisonReport> run_analyze(const PipelineConfig& cfg) {
  const Layout L = layout(cfg);
  const auto bundle = load_built_dataset(cfg);
  const analysis::RuleTagger tagger;
  fs::create_directories(L.analysis_dir());

  auto split_by_label = [](const std::vector<const std::vector<corpus::LabeledExample>*>& parts) {
    std::pair<std::vector<std::string>, std::vector<std::string>> out;
    for (const auto* p : parts)
      for (const auto& ex : *p) (ex.label == corpus::Label::real ? out.first : out.second).push_back(ex.text);
    return out;
  };

  std::vector<analysis::ComparisonReport> reports;
  std::string tables;
  ordered_json combined = ordered_json::object();
  const std::vector<std::pair<std::string, std::vector<const std::vector<corpus::LabeledExample>*>>> scopes{
      {"defender", {&bundle.train, &bundle.dev}}, {"attacker", {&bundle.test}}};
  for (const auto& [scope, parts] : scopes) {
    auto [real, generated] = split_by_label(parts);
    auto rs = analysis::corpus_stats("real", real, tagger);
    auto gs = analysis::corpus_stats("generated", generated, tagger);
    auto report = analysis::compare_profiles(rs, gs, tagger.name(), tagger.version());
    report.scope = scope;
    write_file(L.analysis_dir() / (scope + "_real_words.csv"), analysis::frequency_csv(report.real.words));
    write_file(L.analysis_dir() / (scope + "_generated_words.csv"), analysis::frequency_csv(report.generated.words));
    combined[scope] = report.to_json();
    tables += "[" + scope + " era]\n" + report.table() + "\n";
    reports.push_back(std::move(report));
  }
  write_json(L.analysis_dir() / "analysis.json", combined);
  write_file(L.analysis_dir() / "table1.txt", tables);
  return reports;
}

TrainEvalOutcome run_train_eval(const PipelineConfig& cfg) {
  cfg.validate();
  const Layout L = layout(cfg);
  const auto bundle = load_built_dataset(cfg);
  const auto& c = cfg.classifiers;

  pre::BackboneStore store(L.backbone_dir());
  if (needs_backbones(c.specs)) {
    std::vector<std::string> texts;
    std::string source = "background";
    const auto part = prepare_corpus(cfg);
    texts = part.background;
    if (texts.empty()) {
      // No out-of-era text: fall back to the labeled training texts only.
      source = "train";
      texts = corpus::texts_of(bundle.train);
    }
    const std::string inputs = fingerprint({std::to_string(cfg.seed), hash_texts(texts), dump(to_json(cfg)["classifiers"]["backbones"])});
    const fs::path manifest = L.backbone_dir() / "suite.json";
    if (!is_current(manifest, inputs) && fs::exists(L.backbone_dir())) {
      for (const char* id : {"awd_lstm", "bert", "distilbert"}) fs::remove_all(L.backbone_dir() / id);
    }
    fs::create_directories(L.backbone_dir());
    pre::build_backbones(store, texts, c.backbones, cfg.seed + 41);
    write_json(manifest, ordered_json{{"inputs", inputs}, {"source", source}, {"texts", texts.size()}});
  }

  fs::create_directories(L.eval_dir());
  fs::remove(L.eval_dir() / "runs.jsonl");
  TrainEvalOutcome out;
  for (const auto& name : c.specs) {
    const auto spec = clf::spec_from_json(name, c.overrides.value(name, nlohmann::json::object()));
    const fs::path model_dir = L.eval_dir() / name;
    fs::remove_all(model_dir);
    eval::ExperimentOptions opts;
    opts.context.backbones = &store;
    opts.context.fallback = c.backbones;
    opts.context.progress = [&name](const std::string& m) { log_debug(name + ": " + m); };
    opts.run_dir = L.eval_dir();
    opts.save_models = true;
    log_info("training " + name + " with seeds " + nlohmann::json(c.seeds).dump());
    try {
      auto report = eval::run_experiment(spec, bundle, c.seeds, opts);
      write_json(L.eval_dir() / (name + ".json"), report.to_json());
      if (c.misclassified_examples > 0) {
        auto model = clf::load_model(model_dir / ("seed-" + std::to_string(c.seeds.front())));
        write_json(L.eval_dir() / (name + "_misclassified.json"),
                   eval::misclassification_report(*model, bundle.test, c.misclassified_examples).to_json());
      }
      log_info(name + ": mean test accuracy " + std::to_string(report.accuracy.mean));
      out.reports.push_back(std::move(report));
    } catch (const std::exception& e) {
      log_info(name + " failed: " + e.what());
      out.failures[name] = e.what();
    }
  }

  out.table = eval::format_table(eval::table_rows(out.reports));
  for (const auto& [name, err] : out.failures) out.table += "FAILED " + clf::display_name(name) + ": " + err + "\n";
  write_file(L.eval_dir() / "table2.txt", out.table);
  ordered_json summary{{"dataset_hash", bundle.hash()}, {"reports", ordered_json::array()},
                       {"failures", ordered_json::object()}};
  for (const auto& r : out.reports) summary["reports"].push_back(r.to_json());
  for (const auto& [name, err] : out.failures) summary["failures"][name] = err;
  write_json(L.eval_dir() / "summary.json", summary);
  return out;
}

survey::Survey run_survey_create(const PipelineConfig& cfg) {
  cfg.validate();
  const auto bundle = load_built_dataset(cfg);
  const auto& o = cfg.survey;
  auto s = survey::create_survey(bundle.test, {.id = o.id,
                                               .sets = o.sets,
                                               .per_set = o.per_set,
                                               .generated = o.generated,
                                               .real = o.real,
                                               .seed = cfg.seed + 51});
  survey::SurveyStore::create(layout(cfg).survey_dir(o.id), s);
  return s;
}

survey::SurveyAggregate run_survey_aggregate(const PipelineConfig& cfg) {
  const fs::path dir = layout(cfg).survey_dir(cfg.survey.id);
  const survey::SurveyStore store(dir);
  auto a = store.aggregate(cfg.survey.threshold);
  write_json(dir / "aggregate.json", a.to_json());
  write_file(dir / "per_headline.csv", a.per_headline_csv());
  ordered_json log = ordered_json::array();
  for (const auto& j : store.judgments())
    log.push_back({{"session_id", j.session_id},
                   {"headline_id", j.headline_id},
                   {"answer", corpus::to_string(j.answer)},
                   {"timestamp", j.timestamp}});
  write_json(dir / "judgments.json", log);
  write_file(dir / "aggregate.txt", a.text() + "\n" + eval::format_table({a.table_row()}));
  return a;
}

std::string run_report(const PipelineConfig& cfg) {
  const Layout L = layout(cfg);
  std::ostringstream os;
  auto section = [&](const std::string& title, const fs::path& file) {
    os << "== " << title << " ==\n";
    if (fs::exists(file))
      os << read_file(file);
    else
      os << "(not available: " << file.string() << ")\n";
    os << "\n";
  };
  section("Dataset", L.dataset_dir() / "manifest.json");
  section("Generated headline analysis", L.analysis_dir() / "table1.txt");
  section("Classifier accuracy on the attacker era", L.eval_dir() / "table2.txt");
  section("Human survey", L.survey_dir(cfg.survey.id) / "aggregate.txt");
  const std::string text = os.str();
  fs::create_directories(L.report_dir());
  write_file(L.report_dir() / "report.txt", text);
  return text;
}

}  // namespace hldet::app
