#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hldet/text.hpp"

namespace hldet::corpus {

/// Provenance of a headline; doubles as the classification label.
enum class Label { real, generated };

std::string_view to_string(Label label);
/// Throws ConfigError for anything other than "real" / "generated".
Label parse_label(std::string_view s);

struct Headline {
  std::string text;
  Date publish_date;
  Label source = Label::real;
  /// For generated headlines: the year of the real data the generator was fitted on.
  int year = 0;
};

/// Normalizes the text and enforces the Headline invariants. Throws DataError
/// when the normalized text has no word tokens.
Headline make_headline(std::string_view raw_text, Date date, Label source,
                       std::optional<int> year = std::nullopt);

struct LabeledExample {
  std::string text;
  Label label = Label::real;
  int year = 0;

  bool operator==(const LabeledExample&) const = default;
};

enum class Split { train, dev, test };
std::string_view to_string(Split split);

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
};

struct LoadResult {
  std::vector<Headline> headlines;
  std::vector<RejectedRow> rejects;
};

enum class CorpusFormat { csv };

/// Reads a `publish_date,headline_text` CSV. Invalid rows go to `rejects`; an
/// input without any valid row raises DataError("empty corpus").
LoadResult load_corpus(const std::filesystem::path& path, CorpusFormat format = CorpusFormat::csv,
                       Label source = Label::real);

/// Writes headlines in the same CSV schema load_corpus reads.
void write_corpus_csv(const std::filesystem::path& path, const std::vector<Headline>& headlines);

/// Keeps the first occurrence of every text; returns the number removed.
std::size_t dedup_in_place(std::vector<Headline>& headlines);

enum class Era { defender, attacker };
std::string_view to_string(Era era);
Era parse_era(std::string_view s);

struct EraConfig {
  std::vector<int> defender_years{2015};
  std::vector<int> attacker_years{2016, 2017};

  std::optional<Era> era_of(int year) const;
  const std::vector<int>& years(Era era) const {
    return era == Era::defender ? defender_years : attacker_years;
  }
};

/// Synthetic publish date carried by generated headlines: the midpoint of the era's span.
Date era_sentinel_date(Era era, const EraConfig& eras = {});

struct TemporalSplit {
  std::vector<Headline> defender;
  std::vector<Headline> attacker;
  /// Headlines outside both eras. They never enter the labeled dataset but may
  /// serve as unlabeled pretraining text.
  std::vector<Headline> other;

  std::size_t discarded() const { return other.size(); }
};

TemporalSplit temporal_split(const std::vector<Headline>& headlines, const EraConfig& eras = {});

struct DatasetMetadata {
  std::map<std::string, std::size_t> counts;  // "<split>/<label>" -> n
  std::size_t defender_pool_before_balance = 0;
  std::size_t balance_dropped = 0;
  std::size_t duplicates_removed = 0;
  std::size_t conflicts_removed = 0;
  std::size_t test_overlap_removed = 0;
  std::optional<double> balance_ratio;
};

struct DatasetBundle {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> dev;
  std::vector<LabeledExample> test;
  std::uint64_t seed = 0;
  DatasetMetadata metadata;

  const std::vector<LabeledExample>& split(Split s) const;
  /// Fingerprint over every example in split order.
  std::string hash() const;
};

struct BuildOptions {
  std::uint64_t seed = 0;
  /// generated:real ratio applied to the defender pool; nullopt disables balancing.
  std::optional<double> balance_ratio = 1.0;
};

/// Number of dev examples for a pool of n (20%, rounded half up).
std::size_t dev_size_for(std::size_t pool_size);

DatasetBundle build_dataset(const std::vector<Headline>& defender_real,
                            const std::vector<Headline>& defender_generated,
                            const std::vector<Headline>& attacker_real,
                            const std::vector<Headline>& attacker_generated,
                            const BuildOptions& options = {});

/// One JSON object per line: {"text","label","split","year"}; LF line endings.
std::string to_jsonl(const DatasetBundle& bundle);
void write_dataset_jsonl(const std::filesystem::path& path, const DatasetBundle& bundle);
DatasetBundle read_dataset_jsonl(const std::filesystem::path& path);

std::vector<std::string> texts_of(const std::vector<LabeledExample>& examples);

}  // namespace hldet::corpus
