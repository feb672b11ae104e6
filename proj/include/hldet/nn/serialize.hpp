#pragma once

#include <filesystem>

#include "hldet/nn/graph.hpp"

namespace hldet::nn {

/// Binary tensor archive: "HLDT" magic, version, then (name, rows, cols, float32 data)
/// records, little-endian.
void save_parameters(const ParameterSet& params, const std::filesystem::path& path);

/// Loads values into parameters with matching names. Every parameter in `params`
/// must be present with the same shape unless `allow_missing` is set.
void load_parameters(ParameterSet& params, const std::filesystem::path& path, bool allow_missing = false);

/// Copies values of same-named, same-shaped parameters from `src` into `dst`;
/// returns the number copied.
std::size_t copy_matching(const ParameterSet& src, ParameterSet& dst);

}  // namespace hldet::nn
