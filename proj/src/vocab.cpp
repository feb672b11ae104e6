#include "hldet/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "hldet/common.hpp"
#include "hldet/text.hpp"

namespace hldet {

VocabIndex::VocabIndex(std::vector<std::string> extra_specials) {
  add("<pad>");
  add("<unk>");
  for (const auto& s : extra_specials) add(s);
  specials_ = size();
}

int VocabIndex::add(std::string_view token) {
  std::string key(token);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  int id = size();
  index_.emplace(key, id);
  tokens_.push_back(std::move(key));
  return id;
}

int VocabIndex::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::string VocabIndex::hash() const {
  Fnv1a h;
  for (const auto& t : tokens_) {
    h.update(t);
    h.update("\n");
  }
  return h.hex();
}

void VocabIndex::save(const std::filesystem::path& path) const {
  std::string out = std::to_string(specials_) + "\n";
  for (const auto& t : tokens_) out += t + "\n";
  write_file(path, out);
}

VocabIndex VocabIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary " + path.string());
  std::string line;
  std::getline(in, line);
  int specials = std::stoi(line);
  std::vector<std::string> tokens;
  while (std::getline(in, line)) tokens.push_back(line);
  if (static_cast<int>(tokens.size()) < specials || specials < 2) throw DataError("corrupt vocabulary");
  VocabIndex v(std::vector<std::string>(tokens.begin() + 2, tokens.begin() + specials));
  for (std::size_t i = static_cast<std::size_t>(specials); i < tokens.size(); ++i) v.add(tokens[i]);
  return v;
}

VocabIndex build_vocab(const std::vector<std::string>& texts, int max_size,
                       std::vector<std::string> extra_specials, int min_count) {
  if (max_size < 1) throw ConfigError("vocabulary max_size must be >= 1");
  if (texts.empty()) throw DataError("cannot build a vocabulary from no texts");
  std::map<std::string, long> counts;
  for (const auto& t : texts)
    for (auto& tok : tokenize(t)) ++counts[tok];
  std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
  // std::map iteration is already lexicographic; stable sort keeps that for ties.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  VocabIndex vocab(std::move(extra_specials));
  int added = 0;
  for (const auto& [tok, n] : ranked) {
    if (added >= max_size || n < min_count) break;
    if (vocab.contains(tok)) continue;
    vocab.add(tok);
    ++added;
  }
  return vocab;
}

std::vector<int> encode_tokens(std::string_view text, const VocabIndex& vocab) {
  std::vector<int> ids;
  for (const auto& tok : tokenize(text)) ids.push_back(vocab.id(tok));
  return ids;
}

std::vector<int> encode(std::string_view text, const VocabIndex& vocab, int max_len) {
  auto ids = encode_tokens(text, vocab);
  ids.resize(static_cast<std::size_t>(std::max(max_len, 0)), VocabIndex::kPad);
  return ids;
}

}  // namespace hldet
