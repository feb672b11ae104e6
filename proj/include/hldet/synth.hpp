#pragma once

#include <cstdint>
#include <vector>

#include "hldet/corpus.hpp"

/// Seeded synthetic stand-in for a dated news-headline corpus: a weighted
/// grammar over topical templates with per-year entities and topic drift, so a
/// temporal split sees genuinely shifted content.
namespace hldet::synth {

struct SynthConfig {
  int first_year = 2010;
  int last_year = 2017;
  /// Headlines drawn per year before de-duplication.
  std::size_t per_year = 10000;
  std::uint64_t seed = 2021;
};

/// Headlines in chronological order (by drawn date), texts already normalized.
std::vector<corpus::Headline> generate_corpus(const SynthConfig& cfg);

/// Corpus CSV text (`publish_date,headline_text`).
void write_corpus(const std::filesystem::path& path, const SynthConfig& cfg);

}  // namespace hldet::synth
