#include "hldet/fixtures.hpp"

#include <algorithm>

#include "hldet/common.hpp"
#include "hldet/synth.hpp"
#include "hldet/text.hpp"

namespace hldet::fixtures {

SeparableFixture separable_fixture(std::size_t per_class, std::uint64_t seed) {
  synth::SynthConfig cfg;
  cfg.first_year = 2015;
  cfg.last_year = 2015;
  cfg.per_year = 2 * per_class + 64;
  cfg.seed = seed;
  auto pool = synth::generate_corpus(cfg);
  Rng rng(seed ^ 0x5eedf17ULL);
  std::shuffle(pool.begin(), pool.end(), rng);
  std::vector<corpus::LabeledExample> all;
  for (std::size_t i = 0; i < 2 * per_class && i < pool.size(); ++i) {
    corpus::LabeledExample e{pool[i].text, corpus::Label::real, pool[i].year};
    if (i % 2 == 1) {
      auto tokens = tokenize(e.text);
      tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(rng() % (tokens.size() + 1)), kMarkerToken);
      e.text = join(tokens, " ");
      e.label = corpus::Label::generated;
    }
    all.push_back(std::move(e));
  }
  std::shuffle(all.begin(), all.end(), rng);
  SeparableFixture f;
  const std::size_t dev = corpus::dev_size_for(all.size());
  f.train.assign(all.begin(), all.end() - static_cast<std::ptrdiff_t>(dev));
  f.dev.assign(all.end() - static_cast<std::ptrdiff_t>(dev), all.end());
  return f;
}

clf::TrainContext fixture_context() {
  clf::TrainContext ctx;
  ctx.fallback.awd = {.embed_dim = 48, .hidden = 96, .layers = 2};
  ctx.fallback.awd_training.epochs = 4;
  ctx.fallback.encoder.net = {.layers = 2, .dim = 64, .heads = 4, .ffn = 128, .max_positions = 32, .dropout = 0.1f};
  ctx.fallback.encoder_training.epochs = 3;
  ctx.fallback.distilled_layers = 1;
  return ctx;
}

}  // namespace hldet::fixtures
