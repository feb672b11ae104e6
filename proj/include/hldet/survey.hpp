#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hldet/common.hpp"
#include "hldet/corpus.hpp"
#include "hldet/evaluation.hpp"

/// Randomized real-or-generated judgment surveys with durable, append-only storage.
namespace hldet::survey {

using corpus::Label;

/// Rejections surfaced to participants; the HTTP layer maps kind to a status code.
class SurveyError : public std::runtime_error {
 public:
  enum class Kind { invalid, not_found, conflict };
  SurveyError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct SurveyItem {
  std::string headline_id;
  std::string text;
  /// Hidden from participants.
  Label label = Label::real;
  std::size_t set = 0;
};

struct SurveyOptions {
  std::string id = "main";
  std::size_t sets = 3;
  std::size_t per_set = 31;
  /// Items drawn from each label first; the rest of sets * per_set is drawn from the remaining pool.
  std::size_t generated = 45;
  std::size_t real = 30;
  std::uint64_t seed = 0;
};

struct Survey {
  std::string id;
  std::size_t sets = 0;
  std::size_t per_set = 0;
  std::uint64_t seed = 0;
  std::vector<SurveyItem> items;
  /// Items per label actually selected, plus how many came from the random fill.
  std::size_t generated_items = 0;
  std::size_t real_items = 0;
  std::size_t random_fill = 0;

  const SurveyItem* find(const std::string& headline_id) const;
  nlohmann::ordered_json to_json() const;
  static Survey from_json(const nlohmann::json& j);
};

/// Samples sets * per_set distinct items without replacement. Throws DataError when
/// the pool is too small, lacks a label, or cannot supply the requested per-label counts.
Survey create_survey(const std::vector<corpus::LabeledExample>& pool, const SurveyOptions& opts);

struct Progress {
  std::size_t answered = 0;
  std::size_t total = 0;
};

/// What a participant sees; carries no label.
struct NextItem {
  std::string headline_id;
  std::string text;
  Progress progress;
};

struct Judgment {
  std::string session_id;
  std::string headline_id;
  Label answer = Label::real;
  std::string timestamp;
};

struct HeadlineStat {
  std::string headline_id;
  std::string text;
  Label label = Label::real;
  std::size_t shown = 0;
  std::size_t correct = 0;
  std::size_t answered_generated = 0;
  /// correct / shown, 0 when never judged.
  double correct_fraction = 0.0;
  /// Majority verdict: identified when correct_fraction > 0.5.
  bool identified = false;
};

struct SurveyAggregate {
  std::string survey_id;
  std::size_t total_answers = 0;
  std::size_t total_correct = 0;
  std::size_t generated_correct = 0;
  std::size_t generated_answers = 0;
  std::size_t real_correct = 0;
  std::size_t real_answers = 0;
  /// 0 with no_judgments set when there is nothing to divide by.
  double overall_fraction = 0.0;
  double generated_fraction = 0.0;
  double real_fraction = 0.0;
  bool no_judgments = false;
  std::size_t sessions = 0;
  std::vector<HeadlineStat> per_headline;
  double threshold = 0.80;
  /// Headlines whose share of a given answer is strictly above the threshold.
  std::vector<std::string> generated_judged_generated;
  std::vector<std::string> generated_judged_real;
  std::vector<std::string> real_judged_real;
  std::vector<std::string> real_judged_generated;
  /// Participants as a classifier ("generated" positive), for the accuracy table.
  eval::ConfusionCounts confusion;

  nlohmann::ordered_json to_json() const;
  /// headline_id,label,shown_count,correct_count
  std::string per_headline_csv() const;
  std::string text() const;
  /// "Human" row; zeros when there are no judgments.
  eval::TableRow table_row() const;
};

SurveyAggregate aggregate(const Survey& survey, const std::vector<Judgment>& judgments, double threshold = 0.80);

/// A survey plus its session and judgment logs in one directory. All methods are
/// thread-safe; judgments are fsynced before record_judgment returns.
class SurveyStore {
 public:
  /// Writes survey.json into an empty (or missing) dir. Re-creating the identical
  /// survey is a no-op; a different survey in a used dir is a ConfigError.
  static void create(const std::filesystem::path& dir, const Survey& survey);
  /// Opens an existing store and replays its logs. `session_seed` seeds session
  /// tokens and orders; nullopt uses std::random_device.
  explicit SurveyStore(std::filesystem::path dir, std::optional<std::uint64_t> session_seed = std::nullopt);

  const Survey& survey() const { return survey_; }
  const std::filesystem::path& dir() const { return dir_; }

  /// New anonymous session with its own item order.
  std::string create_session();
  /// Next unanswered item, or nullopt when the session is complete.
  std::optional<NextItem> next(const std::string& session_id) const;
  Progress progress(const std::string& session_id) const;
  /// Validates and durably appends one judgment. Answer must be "real" or "generated".
  Progress record_judgment(const std::string& session_id, const std::string& headline_id, const std::string& answer);

  std::vector<Judgment> judgments() const;
  SurveyAggregate aggregate(double threshold = 0.80) const;

 private:
  struct Session {
    std::vector<std::size_t> order;
    std::map<std::string, Label> answers;
  };
  const Session& session(const std::string& id) const;
  std::vector<std::size_t> draw_order();
  void append(const std::filesystem::path& file, const std::string& line);

  std::filesystem::path dir_;
  Survey survey_;
  mutable std::mutex mu_;
  Rng rng_;
  std::map<std::string, Session> sessions_;
  std::vector<Judgment> judgments_;
};

}  // namespace hldet::survey
