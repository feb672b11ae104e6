#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace hldet::analysis {

struct FrequencyTable {
  /// Sorted by count descending, ties broken lexicographically.
  std::vector<std::pair<std::string, std::int64_t>> entries;
  std::int64_t corpus_size = 0;
};

struct PosProfile {
  /// Penn Treebank tag -> relative frequency; sums to 1.
  std::map<std::string, double> tag_freq;
  std::map<std::string, std::int64_t> tag_counts;
  std::int64_t token_count = 0;

  /// Tags ordered by frequency descending, ties lexicographic.
  std::vector<std::pair<std::string, double>> ranked() const;
};

/// Maps a token sequence to an equal-length sequence of Penn Treebank tags.
class Tagger {
 public:
  virtual ~Tagger() = default;
  virtual std::string name() const = 0;
  virtual std::string version() const = 0;
  virtual std::vector<std::string> tag(const std::vector<std::string>& tokens) const = 0;
};

/// Lexicon, suffix and local-context rules for lowercased headline text.
class RuleTagger final : public Tagger {
 public:
  std::string name() const override { return "hldet-rule-tagger"; }
  std::string version() const override { return "1.0"; }
  std::vector<std::string> tag(const std::vector<std::string>& tokens) const override;
};

bool is_penn_tag(const std::string& tag);

/// Top-k word tokens after normalization. Throws ConfigError if k < 1 and
/// DataError on an empty corpus.
FrequencyTable word_frequencies(const std::vector<std::string>& headlines, int k = 15);

/// Throws DataError if the tagger returns a different number of tags than tokens,
/// emits a non-Penn tag, or the corpus has no tokens.
PosProfile pos_profile(const std::vector<std::string>& headlines, const Tagger& tagger);

/// Mean word count after normalization. Throws DataError on empty input.
double mean_length(const std::vector<std::string>& headlines);

struct CorpusStats {
  std::string label;
  std::size_t headlines = 0;
  FrequencyTable words;
  PosProfile pos;
  double mean_length = 0.0;
};

CorpusStats corpus_stats(const std::string& label, const std::vector<std::string>& headlines,
                         const Tagger& tagger, int k = 15);

struct TagDelta {
  std::string tag;
  double real = 0.0;
  double generated = 0.0;
  /// generated - real
  double delta = 0.0;
};

struct ComparisonReport {
  CorpusStats real;
  CorpusStats generated;
  /// Every tag seen in either set, ordered by real frequency then name.
  std::vector<TagDelta> deltas;
  std::string tagger_name;
  std::string tagger_version;
  std::string scope;

  nlohmann::ordered_json to_json() const;
  /// Side-by-side top-n tag table with mean lengths.
  std::string table(std::size_t top_n = 10) const;
};

ComparisonReport compare_profiles(const CorpusStats& real_stats, const CorpusStats& generated_stats,
                                  const std::string& tagger_name = {}, const std::string& tagger_version = {});

/// token,count lines with a header row.
std::string frequency_csv(const FrequencyTable& table);

}  // namespace hldet::analysis
