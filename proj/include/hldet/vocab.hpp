#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hldet {

/// Dense token <-> id map. Ids 0 and 1 are always padding and unknown; further
/// specials (e.g. <bos>, <eos>, <cls>, <mask>) follow, then regular tokens.
class VocabIndex {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  explicit VocabIndex(std::vector<std::string> extra_specials = {});

  /// Adds a token if absent; returns its id.
  int add(std::string_view token);
  /// Id of `token`, or kUnk.
  int id(std::string_view token) const;
  bool contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }
  int special_count() const { return specials_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::string hash() const;
  /// One token per line; the first line records the special count.
  void save(const std::filesystem::path& path) const;
  static VocabIndex load(const std::filesystem::path& path);

 private:
  int specials_ = 2;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Indexes the `max_size` most frequent whitespace tokens of `texts` (ties broken
/// lexicographically) after the specials. Tokens rarer than `min_count` are skipped.
/// Throws ConfigError if max_size < 1 and DataError if texts is empty.
VocabIndex build_vocab(const std::vector<std::string>& texts, int max_size,
                       std::vector<std::string> extra_specials = {}, int min_count = 1);

/// Token ids truncated or right-padded with kPad to exactly max_len.
std::vector<int> encode(std::string_view text, const VocabIndex& vocab, int max_len);

/// Token ids without padding or truncation.
std::vector<int> encode_tokens(std::string_view text, const VocabIndex& vocab);

}  // namespace hldet
