#include "hldet/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "hldet/common.hpp"

namespace hldet::eval {

namespace {

double ratio(std::size_t num, std::size_t den, bool& undefined) {
  undefined = den == 0;
  return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::ordered_json summary_json(const Summary& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max}};
}

nlohmann::ordered_json run_json(const RunResult& r) {
  const auto& m = r.metrics;
  return {{"seed", r.seed},
          {"confusion", {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"fn", r.confusion.fn}, {"tn", r.confusion.tn}}},
          {"accuracy", m.accuracy},
          {"precision", m.precision},
          {"recall", m.recall},
          {"precision_undefined", m.precision_undefined},
          {"recall_undefined", m.recall_undefined},
          {"macro_precision", m.macro_precision},
          {"macro_recall", m.macro_recall},
          {"dev_accuracy", r.dev_accuracy},
          {"train_seconds", r.train_seconds}};
}

void append_line(const std::filesystem::path& path, const std::string& line) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app | std::ios::binary);
  out << line << '\n';
  out.flush();
  if (!out) throw std::runtime_error("failed to append to " + path.string());
}

std::string pct(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

}  // namespace

ConfusionCounts confusion(const std::vector<Label>& predicted, const std::vector<Label>& gold) {
  if (predicted.size() != gold.size())
    throw DataError("prediction/gold length mismatch: " + std::to_string(predicted.size()) + " vs " +
                    std::to_string(gold.size()));
  if (gold.empty()) throw DataError("confusion over zero examples");
  ConfusionCounts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool p = predicted[i] == Label::generated, g = gold[i] == Label::generated;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

Metrics metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw DataError("metrics over zero examples");
  Metrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  m.precision = ratio(c.tp, c.tp + c.fp, m.precision_undefined);
  m.recall = ratio(c.tp, c.tp + c.fn, m.recall_undefined);
  bool u1 = false, u2 = false;
  const double real_precision = ratio(c.tn, c.tn + c.fn, u1);
  const double real_recall = ratio(c.tn, c.tn + c.fp, u2);
  m.macro_precision = (m.precision + real_precision) / 2.0;
  m.macro_recall = (m.recall + real_recall) / 2.0;
  return m;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / n);
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  s.mean = std::clamp(s.mean, s.min, s.max);
  return s;
}

EvalReport summarize_runs(const std::string& spec_name, const nlohmann::ordered_json& spec,
                          const std::string& dataset_hash, std::vector<RunResult> runs) {
  EvalReport r;
  r.spec_name = spec_name;
  r.spec = spec;
  r.dataset_hash = dataset_hash;
  r.runs = std::move(runs);
  std::vector<double> acc, prec, rec, mp, mr;
  for (const auto& run : r.runs) {
    acc.push_back(run.metrics.accuracy);
    prec.push_back(run.metrics.precision);
    rec.push_back(run.metrics.recall);
    mp.push_back(run.metrics.macro_precision);
    mr.push_back(run.metrics.macro_recall);
    r.any_undefined = r.any_undefined || run.metrics.precision_undefined || run.metrics.recall_undefined;
  }
  r.accuracy = summarize(acc);
  r.precision = summarize(prec);
  r.recall = summarize(rec);
  r.macro_precision = summarize(mp);
  r.macro_recall = summarize(mr);
  return r;
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json runs_json = nlohmann::ordered_json::array();
  for (const auto& r : runs) runs_json.push_back(run_json(r));
  return {{"spec_name", spec_name},
          {"method", clf::display_name(spec_name)},
          {"spec", spec},
          {"dataset_hash", dataset_hash},
          {"runs", runs_json},
          {"accuracy", summary_json(accuracy)},
          {"precision", summary_json(precision)},
          {"recall", summary_json(recall)},
          {"macro_precision", summary_json(macro_precision)},
          {"macro_recall", summary_json(macro_recall)},
          {"undefined_metric", any_undefined}};
}

RunResult evaluate(const clf::TrainedModel& model, const std::vector<corpus::LabeledExample>& test) {
  auto preds = clf::predict(model, corpus::texts_of(test));
  std::vector<Label> p, g;
  for (std::size_t i = 0; i < test.size(); ++i) {
    p.push_back(preds[i].label);
    g.push_back(test[i].label);
  }
  RunResult r;
  r.seed = model.seed();
  r.confusion = confusion(p, g);
  r.metrics = metrics(r.confusion);
  return r;
}

EvalReport run_experiment(const clf::ClassifierSpec& spec, const corpus::DatasetBundle& bundle,
                          const std::vector<std::uint64_t>& seeds, const ExperimentOptions& opts) {
  if (seeds.size() != 3 || std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != 3)
    throw ConfigError("an experiment needs three distinct seeds");
  const std::string name = clf::spec_name(spec);
  const std::string hash = bundle.hash();
  std::vector<RunResult> runs;
  for (auto seed : seeds) {
    log_info("training " + name + " seed " + std::to_string(seed));
    const auto start = std::chrono::steady_clock::now();
    std::unique_ptr<clf::TrainedModel> model;
    try {
      model = clf::train(spec, bundle.train, bundle.dev, seed, opts.context);
    } catch (const std::exception& e) {
      if (opts.run_dir)
        append_line(*opts.run_dir / "runs.jsonl",
                    nlohmann::ordered_json{{"spec", name}, {"seed", seed}, {"error", e.what()}}.dump());
      throw;
    }
    RunResult r = evaluate(*model, bundle.test);
    r.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.dev_accuracy = clf::accuracy(*model, bundle.dev);
    log_info(name + " seed " + std::to_string(seed) + " test accuracy " + std::to_string(r.metrics.accuracy));
    if (opts.run_dir) {
      nlohmann::ordered_json line = run_json(r);
      line["spec"] = name;
      line["dataset_hash"] = hash;
      append_line(*opts.run_dir / "runs.jsonl", line.dump());
      if (opts.save_models) {
        model->manifest()["dataset_hash"] = hash;
        clf::save_model(*model, *opts.run_dir / name / ("seed-" + std::to_string(seed)));
      }
    }
    runs.push_back(r);
  }
  return summarize_runs(name, clf::spec_to_json(spec), hash, std::move(runs));
}

MisclassificationReport misclassification_report(const std::vector<double>& scores,
                                                 const std::vector<corpus::LabeledExample>& test, std::size_t n) {
  if (scores.size() != test.size()) throw DataError("scores/test length mismatch");
  MisclassificationReport rep;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Label p = scores[i] >= 0.5 ? Label::generated : Label::real;
    if (p == test[i].label) continue;
    Misclassified m{test[i].text, test[i].label, p, scores[i]};
    (test[i].label == Label::generated ? rep.generated_as_real : rep.real_as_generated).push_back(std::move(m));
  }
  std::stable_sort(rep.generated_as_real.begin(), rep.generated_as_real.end(),
                   [](const auto& a, const auto& b) { return a.score < b.score; });
  std::stable_sort(rep.real_as_generated.begin(), rep.real_as_generated.end(),
                   [](const auto& a, const auto& b) { return a.score > b.score; });
  if (rep.generated_as_real.size() > n) rep.generated_as_real.resize(n);
  if (rep.real_as_generated.size() > n) rep.real_as_generated.resize(n);
  return rep;
}

MisclassificationReport misclassification_report(const clf::TrainedModel& model,
                                                 const std::vector<corpus::LabeledExample>& test, std::size_t n) {
  return misclassification_report(model.scores(corpus::texts_of(test)), test, n);
}

nlohmann::ordered_json MisclassificationReport::to_json() const {
  auto list = [](const std::vector<Misclassified>& v) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (const auto& m : v)
      a.push_back({{"text", m.text}, {"gold", corpus::to_string(m.gold)},
                   {"predicted", corpus::to_string(m.predicted)}, {"score", m.score}});
    return a;
  };
  return {{"generated_as_real", list(generated_as_real)}, {"real_as_generated", list(real_as_generated)}};
}

std::vector<TableRow> table_rows(const std::vector<EvalReport>& reports) {
  static const std::map<std::string, int> group{{"naive_bayes", 0}, {"elastic_net", 0}, {"cnn", 1},
                                                {"bilstm", 1},      {"bilstm_attention", 1}, {"ulmfit", 2},
                                                {"bert", 3},        {"distilbert", 3}};
  std::vector<TableRow> rows;
  int last = -1;
  for (const auto& r : reports) {
    auto it = group.find(r.spec_name);
    const int gid = it == group.end() ? 4 : it->second;
    rows.push_back({clf::display_name(r.spec_name), r.accuracy.mean, r.precision.mean, r.recall.mean,
                    !rows.empty() && gid != last});
    last = gid;
  }
  return rows;
}

std::string format_table(const std::vector<TableRow>& rows) {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.method.size());
  auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
  const std::string header = pad("Method", width) + " | Ovr. Acc. | Precision | Recall";
  const std::string rule(header.size(), '-');
  std::string out = header + "\n" + rule + "\n";
  for (const auto& r : rows) {
    if (r.group_start) out += rule + "\n";
    out += pad(r.method, width) + " | " + pad(pct(r.accuracy), 9) + " | " + pad(pct(r.precision), 9) + " | " +
           pct(r.recall) + "\n";
  }
  return out;
}

}  // namespace hldet::eval
