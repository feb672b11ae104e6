#include "hldet/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "hldet/common.hpp"

namespace hldet::corpus {

std::string_view to_string(Label label) { return label == Label::real ? "real" : "generated"; }

Label parse_label(std::string_view s) {
  if (s == "real") return Label::real;
  if (s == "generated") return Label::generated;
  throw ConfigError("invalid label '" + std::string(s) + "' (expected real|generated)");
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

std::string_view to_string(Era era) { return era == Era::defender ? "defender" : "attacker"; }

Era parse_era(std::string_view s) {
  if (s == "defender") return Era::defender;
  if (s == "attacker") return Era::attacker;
  throw ConfigError("invalid era '" + std::string(s) + "' (expected defender|attacker)");
}

Headline make_headline(std::string_view raw_text, Date date, Label source, std::optional<int> year) {
  Headline h;
  h.text = normalize_headline(raw_text);
  if (h.text.empty()) throw DataError("headline has no word tokens");
  h.publish_date = date;
  h.source = source;
  h.year = source == Label::real ? date.year : year.value_or(date.year);
  return h;
}

namespace {

// Logical CSV records: a quoted field may span physical lines.
std::vector<std::pair<std::size_t, std::string>> read_records(std::istream& in) {
  std::vector<std::pair<std::size_t, std::string>> records;
  std::string line, pending;
  std::size_t lineno = 0, start = 0;
  bool open = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!open) {
      pending = line;
      start = lineno;
    } else {
      pending += '\n';
      pending += line;
    }
    std::size_t quotes = static_cast<std::size_t>(std::count(line.begin(), line.end(), '"'));
    if (quotes % 2 == 1) open = !open;
    if (!open) records.emplace_back(start, std::move(pending));
  }
  if (open) records.emplace_back(start, std::move(pending));
  return records;
}

}  // namespace

LoadResult load_corpus(const std::filesystem::path& path, CorpusFormat format, Label source) {
  (void)format;
  if (!std::filesystem::exists(path)) throw DataError("corpus not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus " + path.string());

  LoadResult result;
  auto records = read_records(in);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& [lineno, raw] = records[i];
    if (trim(raw).empty()) continue;
    auto fields = split_csv_line(raw);
    if (i == 0 && !fields.empty() && trim(fields[0]) == "publish_date") continue;
    if (fields.size() < 2) {
      result.rejects.push_back({lineno, "expected 2 fields"});
      continue;
    }
    auto date = parse_date(trim(fields[0]));
    if (!date) {
      result.rejects.push_back({lineno, "malformed date '" + fields[0] + "'"});
      continue;
    }
    // Unquoted commas inside the headline are tolerated by re-joining the tail.
    std::string text = fields[1];
    for (std::size_t f = 2; f < fields.size(); ++f) text += "," + fields[f];
    std::string norm = normalize_headline(text);
    if (norm.empty()) {
      result.rejects.push_back({lineno, "empty headline"});
      continue;
    }
    Headline h;
    h.text = std::move(norm);
    h.publish_date = *date;
    h.source = source;
    h.year = date->year;
    result.headlines.push_back(std::move(h));
  }
  if (result.headlines.empty()) throw DataError("empty corpus");
  return result;
}

void write_corpus_csv(const std::filesystem::path& path, const std::vector<Headline>& headlines) {
  std::string out = "publish_date,headline_text\n";
  for (const auto& h : headlines) {
    out += h.publish_date.compact();
    out += ',';
    out += csv_escape(h.text);
    out += '\n';
  }
  write_file(path, out);
}

std::size_t dedup_in_place(std::vector<Headline>& headlines) {
  std::unordered_set<std::string> seen;
  std::size_t before = headlines.size();
  std::erase_if(headlines, [&](const Headline& h) { return !seen.insert(h.text).second; });
  return before - headlines.size();
}

std::optional<Era> EraConfig::era_of(int year) const {
  if (std::find(defender_years.begin(), defender_years.end(), year) != defender_years.end())
    return Era::defender;
  if (std::find(attacker_years.begin(), attacker_years.end(), year) != attacker_years.end())
    return Era::attacker;
  return std::nullopt;
}

Date era_sentinel_date(Era era, const EraConfig& eras) {
  const auto& years = eras.years(era);
  if (years.empty()) throw ConfigError("era has no years");
  auto [lo, hi] = std::minmax_element(years.begin(), years.end());
  if (*lo == *hi) return Date{*lo, 7, 1};
  int span = *hi - *lo + 1;
  if (span % 2 == 0) return Date{*lo + span / 2, 1, 1};
  return Date{*lo + span / 2, 7, 1};
}

TemporalSplit temporal_split(const std::vector<Headline>& headlines, const EraConfig& eras) {
  TemporalSplit out;
  for (const auto& h : headlines) {
    auto era = eras.era_of(h.year);
    if (!era)
      out.other.push_back(h);
    else if (*era == Era::defender)
      out.defender.push_back(h);
    else
      out.attacker.push_back(h);
  }
  return out;
}

const std::vector<LabeledExample>& DatasetBundle::split(Split s) const {
  switch (s) {
    case Split::train: return train;
    case Split::dev: return dev;
    default: return test;
  }
}

std::string DatasetBundle::hash() const {
  Fnv1a h;
  for (Split s : {Split::train, Split::dev, Split::test}) {
    h.update(to_string(s));
    for (const auto& ex : split(s)) {
      h.update(ex.text);
      h.update(to_string(ex.label));
      h.update_u64(static_cast<std::uint64_t>(ex.year));
    }
  }
  return h.hex();
}

std::size_t dev_size_for(std::size_t pool_size) { return (pool_size * 20 + 50) / 100; }

namespace {

std::vector<LabeledExample> to_examples(const std::vector<Headline>& hs, Label label,
                                        std::size_t& dups) {
  std::vector<LabeledExample> out;
  std::unordered_set<std::string> seen;
  for (const auto& h : hs) {
    if (!seen.insert(h.text).second) {
      ++dups;
      continue;
    }
    out.push_back({h.text, label, h.year});
  }
  return out;
}

// A text present in both classes cannot be labeled; the generated copy goes.
std::size_t drop_conflicts(const std::vector<LabeledExample>& real, std::vector<LabeledExample>& gen) {
  std::unordered_set<std::string> real_texts;
  for (const auto& e : real) real_texts.insert(e.text);
  std::size_t before = gen.size();
  std::erase_if(gen, [&](const LabeledExample& e) { return real_texts.count(e.text) > 0; });
  return before - gen.size();
}

// Seeded subsample that keeps the survivors in their original order.
std::vector<LabeledExample> subsample(std::vector<LabeledExample> xs, std::size_t keep, Rng& rng) {
  if (keep >= xs.size()) return xs;
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  std::vector<LabeledExample> out;
  out.reserve(keep);
  for (auto i : idx) out.push_back(std::move(xs[i]));
  return out;
}

}  // namespace

DatasetBundle build_dataset(const std::vector<Headline>& defender_real,
                            const std::vector<Headline>& defender_generated,
                            const std::vector<Headline>& attacker_real,
                            const std::vector<Headline>& attacker_generated,
                            const BuildOptions& options) {
  if (options.balance_ratio && !(*options.balance_ratio > 0.0))
    throw ConfigError("balance_ratio must be > 0");
  if (defender_real.empty() || defender_generated.empty() || attacker_real.empty() ||
      attacker_generated.empty())
    throw DataError("build_dataset requires four non-empty inputs");

  DatasetBundle bundle;
  bundle.seed = options.seed;
  auto& meta = bundle.metadata;
  meta.balance_ratio = options.balance_ratio;
  Rng rng(options.seed);

  auto d_real = to_examples(defender_real, Label::real, meta.duplicates_removed);
  auto d_gen = to_examples(defender_generated, Label::generated, meta.duplicates_removed);
  meta.conflicts_removed += drop_conflicts(d_real, d_gen);
  meta.defender_pool_before_balance = d_real.size() + d_gen.size();

  if (options.balance_ratio) {
    double ratio = *options.balance_ratio;
    auto want_gen = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(d_real.size())));
    if (d_gen.size() > want_gen) {
      d_gen = subsample(std::move(d_gen), want_gen, rng);
    } else {
      auto want_real =
          static_cast<std::size_t>(std::llround(static_cast<double>(d_gen.size()) / ratio));
      d_real = subsample(std::move(d_real), want_real, rng);
    }
  }
  meta.balance_dropped = meta.defender_pool_before_balance - d_real.size() - d_gen.size();

  std::vector<LabeledExample> pool;
  pool.reserve(d_real.size() + d_gen.size());
  pool.insert(pool.end(), d_real.begin(), d_real.end());
  pool.insert(pool.end(), d_gen.begin(), d_gen.end());
  std::shuffle(pool.begin(), pool.end(), rng);
  std::size_t n_dev = dev_size_for(pool.size());
  std::size_t n_train = pool.size() - n_dev;
  bundle.train.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_train));
  bundle.dev.assign(pool.begin() + static_cast<std::ptrdiff_t>(n_train), pool.end());

  auto a_real = to_examples(attacker_real, Label::real, meta.duplicates_removed);
  auto a_gen = to_examples(attacker_generated, Label::generated, meta.duplicates_removed);
  meta.conflicts_removed += drop_conflicts(a_real, a_gen);
  std::unordered_set<std::string> seen;
  for (const auto& e : pool) seen.insert(e.text);
  for (auto* part : {&a_real, &a_gen}) {
    for (auto& e : *part) {
      if (seen.count(e.text)) {
        ++meta.test_overlap_removed;
        continue;
      }
      bundle.test.push_back(std::move(e));
    }
  }

  for (Split s : {Split::train, Split::dev, Split::test})
    for (Label l : {Label::real, Label::generated}) {
      std::size_t n = 0;
      for (const auto& e : bundle.split(s)) n += e.label == l;
      meta.counts[std::string(to_string(s)) + "/" + std::string(to_string(l))] = n;
    }
  return bundle;
}

std::string to_jsonl(const DatasetBundle& bundle) {
  std::string out;
  for (Split s : {Split::train, Split::dev, Split::test}) {
    for (const auto& ex : bundle.split(s)) {
      nlohmann::ordered_json j;
      j["text"] = ex.text;
      j["label"] = to_string(ex.label);
      j["split"] = to_string(s);
      j["year"] = ex.year;
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

void write_dataset_jsonl(const std::filesystem::path& path, const DatasetBundle& bundle) {
  write_file(path, to_jsonl(bundle));
}

DatasetBundle read_dataset_jsonl(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("dataset not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  DatasetBundle bundle;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    LabeledExample ex{j.at("text").get<std::string>(), parse_label(j.at("label").get<std::string>()),
                      j.value("year", 0)};
    auto split = j.at("split").get<std::string>();
    if (split == "train")
      bundle.train.push_back(std::move(ex));
    else if (split == "dev")
      bundle.dev.push_back(std::move(ex));
    else if (split == "test")
      bundle.test.push_back(std::move(ex));
    else
      throw DataError("unknown split '" + split + "'");
  }
  return bundle;
}

std::vector<std::string> texts_of(const std::vector<LabeledExample>& examples) {
  std::vector<std::string> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.text);
  return out;
}

}  // namespace hldet::corpus
