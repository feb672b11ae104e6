#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hldet {

struct Date {
  int year = 0;
  int month = 0;
  int day = 0;

  auto operator<=>(const Date&) const = default;
  /// YYYYMMDD
  std::string compact() const;
};

bool is_valid_date(int year, int month, int day);

/// Accepts YYYYMMDD or YYYY-MM-DD; nullopt for malformed or impossible dates.
std::optional<Date> parse_date(std::string_view s);

/// Lowercases ASCII, collapses whitespace, drops punctuation-only tokens.
std::string normalize_headline(std::string_view raw);

/// Whitespace tokenization of already-normalized text.
std::vector<std::string> tokenize(std::string_view text);

std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ");

std::string trim(std::string_view s);

/// RFC 4180 field splitting for a single physical line (quoted fields, doubled quotes).
std::vector<std::string> split_csv_line(std::string_view line);

std::string csv_escape(std::string_view field);

}  // namespace hldet
