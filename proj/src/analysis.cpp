#include "hldet/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>
#include <unordered_map>

#include "hldet/common.hpp"
#include "hldet/text.hpp"

namespace hldet::analysis {

namespace {

const std::set<std::string>& penn_tags() {
  static const std::set<std::string> tags{
      "CC",  "CD",  "DT",   "EX",  "FW",  "IN",  "JJ",  "JJR", "JJS", "LS",   "MD", "NN", "NNS",
      "NNP", "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP",   "SYM", "TO", "UH",
      "VB",  "VBD", "VBG",  "VBN", "VBP", "VBZ", "WDT", "WP",  "WP$", "WRB", "$",   "``", "''",
      "(",   ")",   ",",    "--",  ".",   ":",   "#"};
  return tags;
}

const std::unordered_map<std::string, std::string>& lexicon() {
  static const std::unordered_map<std::string, std::string> lex = [] {
    std::unordered_map<std::string, std::string> m;
    auto put = [&m](const std::string& tag, std::initializer_list<const char*> words) {
      for (const char* w : words) m.emplace(w, tag);
    };
    put("DT", {"a", "an", "the", "this", "that", "these", "those", "every", "each", "no", "another", "some",
               "any", "all", "both", "either", "neither"});
    put("IN", {"of", "in", "on", "at", "for", "with", "from", "by", "after", "before", "over", "under",
               "into", "about", "against", "amid", "as", "during", "despite", "near", "since", "until",
               "without", "through", "across", "behind", "between", "among", "if", "because", "while",
               "than", "like", "towards", "toward", "via", "per", "upon", "within", "outside", "onto"});
    put("CC", {"and", "or", "but", "nor", "yet", "plus"});
    put("TO", {"to"});
    put("MD", {"will", "would", "can", "could", "may", "might", "must", "should", "shall", "wo", "ca"});
    put("PRP", {"i", "you", "he", "she", "it", "we", "they", "me", "him", "us", "them", "himself",
                "herself", "itself", "themselves", "ourselves", "myself", "yourself"});
    put("PRP$", {"my", "your", "his", "her", "its", "our", "their"});
    put("WP", {"who", "what", "whom"});
    put("WP$", {"whose"});
    put("WDT", {"which", "whatever"});
    put("WRB", {"how", "when", "where", "why"});
    put("EX", {"there"});
    put("RB", {"not", "n't", "now", "again", "still", "also", "just", "only", "very", "too", "soon", "back",
               "ahead", "away", "never", "already", "ever", "here", "almost", "once", "twice", "today",
               "tonight", "yesterday", "tomorrow", "together", "home", "abroad", "overnight", "even"});
    put("RP", {"up", "down", "out", "off"});
    put("VBZ", {"is", "has", "does", "says", "goes", "gets", "makes", "takes", "sees", "wins", "hits",
                "sets", "puts", "cuts", "lets"});
    put("VBP", {"are", "have", "do", "'re", "'ve"});
    put("VBD", {"was", "were", "had", "did", "said", "went", "got", "made", "took", "saw", "won", "told",
                "became", "came", "gave", "left", "found", "began", "fell", "rose", "broke", "held",
                "paid", "lost", "sold", "led", "met", "ran", "kept", "struck", "shot", "stole", "spent"});
    put("VBN", {"been", "done", "gone", "taken", "given", "seen", "known", "shown", "driven", "stolen",
                "written", "chosen", "hidden", "beaten", "born", "sworn", "thrown", "grown", "frozen"});
    put("VBG", {"being", "having", "doing"});
    put("VB", {"be", "make", "take", "get", "go", "see", "keep", "help", "give", "say", "win", "face",
               "stop", "seek", "become", "come", "meet", "hold", "return", "remain", "lead", "build",
               "fight", "save", "tackle", "boost", "ban"});
    put("JJ", {"new", "big", "old", "top", "young", "high", "low", "major", "local", "national", "former",
               "first", "last", "second", "third", "final", "late", "early", "key", "good", "bad",
               "great", "small", "large", "long", "short", "free", "full", "open", "hot", "cold", "dead",
               "fresh", "rural", "public", "private", "federal", "global", "foreign", "next", "own",
               "human", "worst", "best", "huge", "rare", "fatal", "serious", "several", "many", "few",
               "other", "more", "less", "most", "least", "much", "such", "same", "whole", "main", "real",
               "wild", "hard", "safe", "strong", "fair", "poor", "rich", "remote", "urgent", "annual",
               "regional", "domestic", "international", "indigenous", "senior", "junior", "fake",
               "alleged", "illegal", "missing", "happy", "record", "vital"});
    put("JJR", {"better", "worse", "bigger", "higher", "lower", "older", "younger", "greater", "larger",
                "smaller", "cheaper", "tougher", "stronger", "faster", "longer"});
    put("JJS", {"biggest", "highest", "lowest", "largest", "oldest", "youngest", "greatest", "smallest",
                "cheapest", "toughest", "strongest", "fastest", "longest"});
    put("POS", {"'s", "'"});
    put("UH", {"yes", "oh", "wow"});
    return m;
  }();
  return lex;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_number(const std::string& s) {
  bool digit = false;
  for (char c : s) {
    if (std::isdigit(static_cast<unsigned char>(c))) digit = true;
    else if (c != '.' && c != ',' && c != '$' && c != '%' && c != 'm' && c != 'k' && c != 'b' && c != '-')
      return false;
  }
  return digit;
}

std::string suffix_tag(const std::string& w) {
  if (is_number(w)) return "CD";
  static const std::set<std::string> numbers{"one", "two", "three", "four", "five", "six", "seven", "eight",
                                             "nine", "ten", "hundred", "thousand", "million", "billion",
                                             "dozen", "hundreds", "thousands", "millions"};
  if (numbers.count(w)) return "CD";
  if (ends_with(w, "ing")) return "VBG";
  if (ends_with(w, "ed")) return "VBD";
  if (ends_with(w, "ly")) return "RB";
  if (ends_with(w, "est") && w.size() > 5) return "JJS";
  for (const char* s : {"ous", "ful", "able", "ible", "ive", "ic", "ical", "less", "ish", "ian", "ese", "ary"})
    if (ends_with(w, s)) return "JJ";
  if (ends_with(w, "al") && w.size() > 5) return "JJ";
  if (ends_with(w, "ss") || ends_with(w, "us") || ends_with(w, "is")) return "NN";
  if (ends_with(w, "s")) return "NNS";
  return "NN";
}

bool nominal(const std::string& t) { return t == "NN" || t == "NNS" || t == "NNP" || t == "PRP" || t == "CD"; }

}  // namespace

bool is_penn_tag(const std::string& tag) { return penn_tags().count(tag) > 0; }

std::vector<std::string> RuleTagger::tag(const std::vector<std::string>& tokens) const {
  std::vector<std::string> tags(tokens.size());
  std::vector<bool> from_lexicon(tokens.size(), false);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto it = lexicon().find(tokens[i]);
    from_lexicon[i] = it != lexicon().end();
    tags[i] = from_lexicon[i] ? it->second : suffix_tag(tokens[i]);
  }
  // Context rules, applied left to right on the provisional tags.
  bool have_verb = false;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string prev = i ? tags[i - 1] : "";
    const std::string next = i + 1 < tokens.size() ? tags[i + 1] : "";
    std::string& t = tags[i];
    if (!from_lexicon[i]) {
      if ((prev == "TO" || prev == "MD") && (t == "NN" || t == "VBD")) t = "VB";
      else if (t == "VBD" && (prev == "VBZ" || prev == "VBP" || prev == "VBD" || prev == "VBN" || have_verb ||
                              prev == "DT" || next == "IN" || next == "TO" || next == "" || next == "RP"))
        t = prev == "DT" ? "JJ" : "VBN";
      else if (t == "NNS" && !have_verb && i > 0 && nominal(prev) &&
               (next == "DT" || next == "NN" || next == "NNS" || next == "CD" || next == "PRP$" ||
                next == "JJ" || next == "TO" || next == "IN" || next == "RP" || next == "VBG"))
        t = "VBZ";
      else if (t == "NN" && !have_verb && i > 0 && nominal(prev) && (next == "DT" || next == "PRP$"))
        t = "VBP";
    }
    if (t.rfind("VB", 0) == 0 || t == "MD") have_verb = true;
  }
  return tags;
}

std::vector<std::pair<std::string, double>> PosProfile::ranked() const {
  std::vector<std::pair<std::string, double>> out(tag_freq.begin(), tag_freq.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

FrequencyTable word_frequencies(const std::vector<std::string>& headlines, int k) {
  if (k < 1) throw ConfigError("k must be >= 1, got " + std::to_string(k));
  std::unordered_map<std::string, std::int64_t> counts;
  FrequencyTable table;
  for (const auto& h : headlines)
    for (auto& tok : tokenize(normalize_headline(h))) {
      ++counts[tok];
      ++table.corpus_size;
    }
  if (table.corpus_size == 0) throw DataError("empty corpus");
  std::vector<std::pair<std::string, std::int64_t>> all(counts.begin(), counts.end());
  auto order = [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; };
  std::size_t n = std::min(all.size(), static_cast<std::size_t>(k));
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), order);
  table.entries.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
  return table;
}

PosProfile pos_profile(const std::vector<std::string>& headlines, const Tagger& tagger) {
  PosProfile p;
  for (const auto& h : headlines) {
    auto tokens = tokenize(normalize_headline(h));
    auto tags = tagger.tag(tokens);
    if (tags.size() != tokens.size())
      throw DataError("tagger returned " + std::to_string(tags.size()) + " tags for " +
                      std::to_string(tokens.size()) + " tokens");
    for (const auto& t : tags) {
      if (!is_penn_tag(t)) throw DataError("tagger emitted unknown tag '" + t + "'");
      ++p.tag_counts[t];
      ++p.token_count;
    }
  }
  if (p.token_count == 0) throw DataError("empty corpus");
  for (const auto& [tag, n] : p.tag_counts)
    p.tag_freq[tag] = static_cast<double>(n) / static_cast<double>(p.token_count);
  return p;
}

double mean_length(const std::vector<std::string>& headlines) {
  if (headlines.empty()) throw DataError("mean length of an empty corpus");
  std::int64_t words = 0;
  for (const auto& h : headlines) words += static_cast<std::int64_t>(tokenize(normalize_headline(h)).size());
  return static_cast<double>(words) / static_cast<double>(headlines.size());
}

CorpusStats corpus_stats(const std::string& label, const std::vector<std::string>& headlines,
                         const Tagger& tagger, int k) {
  CorpusStats s;
  s.label = label;
  s.headlines = headlines.size();
  s.words = word_frequencies(headlines, k);
  s.pos = pos_profile(headlines, tagger);
  s.mean_length = mean_length(headlines);
  return s;
}

ComparisonReport compare_profiles(const CorpusStats& real_stats, const CorpusStats& generated_stats,
                                  const std::string& tagger_name, const std::string& tagger_version) {
  ComparisonReport r;
  r.real = real_stats;
  r.generated = generated_stats;
  r.tagger_name = tagger_name;
  r.tagger_version = tagger_version;
  std::set<std::string> tags;
  for (const auto& [t, f] : real_stats.pos.tag_freq) tags.insert(t);
  for (const auto& [t, f] : generated_stats.pos.tag_freq) tags.insert(t);
  auto freq = [](const PosProfile& p, const std::string& t) {
    auto it = p.tag_freq.find(t);
    return it == p.tag_freq.end() ? 0.0 : it->second;
  };
  for (const auto& t : tags) {
    double a = freq(real_stats.pos, t), b = freq(generated_stats.pos, t);
    r.deltas.push_back({t, a, b, b - a});
  }
  std::stable_sort(r.deltas.begin(), r.deltas.end(), [](const TagDelta& x, const TagDelta& y) { return x.real > y.real; });
  return r;
}

namespace {

nlohmann::ordered_json stats_json(const CorpusStats& s) {
  nlohmann::ordered_json words = nlohmann::ordered_json::array();
  for (const auto& [tok, n] : s.words.entries) words.push_back({{"token", tok}, {"count", n}});
  nlohmann::ordered_json tags = nlohmann::ordered_json::array();
  for (const auto& [t, f] : s.pos.ranked())
    tags.push_back({{"tag", t}, {"frequency", f}, {"count", s.pos.tag_counts.at(t)}});
  return {{"label", s.label},
          {"headlines", s.headlines},
          {"tokens", s.pos.token_count},
          {"mean_length", s.mean_length},
          {"top_words", words},
          {"pos", tags}};
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

}  // namespace

nlohmann::ordered_json ComparisonReport::to_json() const {
  nlohmann::ordered_json d = nlohmann::ordered_json::array();
  for (const auto& x : deltas) d.push_back({{"tag", x.tag}, {"real", x.real}, {"generated", x.generated}, {"delta", x.delta}});
  return {{"tagger", {{"name", tagger_name}, {"version", tagger_version}}},
          {"scope", scope},
          {"real", stats_json(real)},
          {"generated", stats_json(generated)},
          {"tag_deltas", d}};
}

std::string ComparisonReport::table(std::size_t top_n) const {
  auto a = real.pos.ranked(), b = generated.pos.ranked();
  std::string out = "Frequencies for the top " + std::to_string(top_n) + " part-of-speech tags";
  if (!scope.empty()) out += " (" + scope + ")";
  out += "\n" + pad("Real", 16) + "Generated\n";
  for (std::size_t i = 0; i < top_n && (i < a.size() || i < b.size()); ++i) {
    std::string left = i < a.size() ? pad(a[i].first, 6) + fixed3(a[i].second) : "";
    std::string right = i < b.size() ? pad(b[i].first, 6) + fixed3(b[i].second) : "";
    out += pad(left, 16) + right + "\n";
  }
  out += "Mean length (words): real " + fixed3(real.mean_length) + ", generated " + fixed3(generated.mean_length) + "\n";
  out += "Tagger: " + tagger_name + " " + tagger_version + "\n";
  return out;
}

std::string frequency_csv(const FrequencyTable& table) {
  std::string out = "token,count\n";
  for (const auto& [tok, n] : table.entries) out += csv_escape(tok) + "," + std::to_string(n) + "\n";
  return out;
}

}  // namespace hldet::analysis
