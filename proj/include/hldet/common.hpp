#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hldet {

/// Raised for invalid user input or configuration. The CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when input data violates a precondition (empty corpus, degenerate set, ...).
/// Also a user-side error for exit-code purposes.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

/// 64-bit FNV-1a, used for dataset/vocab fingerprints in manifests.
class Fnv1a {
 public:
  void update(std::string_view bytes);
  void update_u64(std::uint64_t v);
  std::uint64_t digest() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string hash_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

std::string read_file(const std::filesystem::path& path);
/// Writes atomically (temp file + rename) so readers never observe partial output.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Minimal leveled logger to stderr; silenced by set_log_level(LogLevel::quiet).
enum class LogLevel { quiet = 0, info = 1, debug = 2 };
void set_log_level(LogLevel level);
LogLevel log_level();
void log_info(std::string_view msg);
void log_debug(std::string_view msg);

}  // namespace hldet
