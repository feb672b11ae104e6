// Writes a seeded synthetic dated-headline corpus in the `publish_date,headline_text` schema.
#include <iostream>

#include <CLI11.hpp>

#include "hldet/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"hldet-synth: synthetic dated headline corpus"};
  hldet::synth::SynthConfig cfg;
  std::string out = "corpus.csv";
  app.add_option("--out", out, "output CSV path");
  app.add_option("--first-year", cfg.first_year);
  app.add_option("--last-year", cfg.last_year);
  app.add_option("--per-year", cfg.per_year, "headlines drawn per year");
  app.add_option("--seed", cfg.seed);
  CLI11_PARSE(app, argc, argv);
  try {
    hldet::synth::write_corpus(out, cfg);
  } catch (const std::exception& e) {
    std::cerr << "hldet-synth: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
