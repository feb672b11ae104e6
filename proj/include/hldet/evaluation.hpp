#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hldet/classifiers.hpp"
#include "hldet/corpus.hpp"

namespace hldet::eval {

using corpus::Label;

/// "generated" is the positive class.
struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Throws DataError on a length mismatch or empty input.
ConfusionCounts confusion(const std::vector<Label>& predicted, const std::vector<Label>& gold);

struct Metrics {
  double accuracy = 0.0;
  /// Over the generated class; 0.0 with the flag set when nothing was predicted generated.
  double precision = 0.0;
  /// Over the generated class; 0.0 with the flag set when there are no generated examples.
  double recall = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  /// Unweighted means over both classes, same zero rule.
  double macro_precision = 0.0;
  double macro_recall = 0.0;
};

/// Throws DataError when total() == 0.
Metrics metrics(const ConfusionCounts& c);

struct RunResult {
  std::uint64_t seed = 0;
  ConfusionCounts confusion;
  Metrics metrics;
  double dev_accuracy = 0.0;
  double train_seconds = 0.0;
};

struct Summary {
  double mean = 0.0;
  /// Population standard deviation over the runs.
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
};

Summary summarize(const std::vector<double>& values);

struct EvalReport {
  std::string spec_name;
  nlohmann::ordered_json spec;
  std::string dataset_hash;
  std::vector<RunResult> runs;
  Summary accuracy, precision, recall, macro_precision, macro_recall;
  bool any_undefined = false;

  nlohmann::ordered_json to_json() const;
};

EvalReport summarize_runs(const std::string& spec_name, const nlohmann::ordered_json& spec,
                          const std::string& dataset_hash, std::vector<RunResult> runs);

struct ExperimentOptions {
  clf::TrainContext context;
  /// When set, each finished run appends a line to runs.jsonl here and its model is
  /// saved under <run_dir>/seed-<seed>.
  std::optional<std::filesystem::path> run_dir;
  bool save_models = false;
};

/// Trains once per seed on bundle.train (dev for monitoring), evaluates on bundle.test.
/// Requires three distinct seeds (ConfigError otherwise). A training failure is
/// logged to runs.jsonl before being rethrown.
EvalReport run_experiment(const clf::ClassifierSpec& spec, const corpus::DatasetBundle& bundle,
                          const std::vector<std::uint64_t>& seeds, const ExperimentOptions& opts = {});

/// Evaluates an already trained model.
RunResult evaluate(const clf::TrainedModel& model, const std::vector<corpus::LabeledExample>& test);

struct Misclassified {
  std::string text;
  Label gold = Label::real;
  Label predicted = Label::real;
  double score = 0.0;
};

struct MisclassificationReport {
  /// Generated headlines predicted real, most confidently real first.
  std::vector<Misclassified> generated_as_real;
  /// Real headlines predicted generated, most confidently generated first.
  std::vector<Misclassified> real_as_generated;

  nlohmann::ordered_json to_json() const;
};

MisclassificationReport misclassification_report(const clf::TrainedModel& model,
                                                 const std::vector<corpus::LabeledExample>& test, std::size_t n);
/// Same, from precomputed scores aligned with `test`.
MisclassificationReport misclassification_report(const std::vector<double>& scores,
                                                 const std::vector<corpus::LabeledExample>& test, std::size_t n);

struct TableRow {
  std::string method;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  /// Starts a new group (drawn with a separator above the row).
  bool group_start = false;
};

std::vector<TableRow> table_rows(const std::vector<EvalReport>& reports);
/// Method | Ovr. Acc. | Precision | Recall, values in percent with one decimal.
std::string format_table(const std::vector<TableRow>& rows);

}  // namespace hldet::eval
