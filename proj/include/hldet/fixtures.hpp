#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hldet/classifiers.hpp"
#include "hldet/corpus.hpp"

// Small synthetic datasets with known answers, used by tests and the acceptance suite.
namespace hldet::fixtures {

inline constexpr const char* kMarkerToken = "qzxmarker";

struct SeparableFixture {
  std::vector<corpus::LabeledExample> train;
  std::vector<corpus::LabeledExample> dev;
};

/// Balanced examples drawn from the synthetic headline grammar; every generated
/// example carries kMarkerToken at a random position and no real one does. The
/// pool is shuffled and split 80/20.
SeparableFixture separable_fixture(std::size_t per_class, std::uint64_t seed);

/// Training context whose fallback backbones are small enough to pretrain on a
/// fixture's training texts in about a minute.
clf::TrainContext fixture_context();

}  // namespace hldet::fixtures
