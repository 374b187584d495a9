// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "eraloc/channel.hpp"
#include "eraloc/config.hpp"

namespace eraloc {

/// One stored scene: UE position plus its multipath parameters.
struct Sample {
  std::array<double, 2> ue{};
  std::vector<channel::PathParams> paths;
  std::uint64_t seed = 0;
};

using Dataset = std::vector<Sample>;

/// `count` samples; sample i draws from substream (seed, dataset, i), so the
/// result does not depend on the worker count.
Dataset generate_dataset(const RunConfig& cfg, std::uint64_t seed, std::size_t count);
inline Dataset generate_dataset(const RunConfig& cfg, std::uint64_t seed) {
  return generate_dataset(cfg, seed, cfg.train.sample_count);
}

/// First `train_count()` samples train, the rest validate.
std::pair<Dataset, Dataset> split_dataset(const RunConfig& cfg, const Dataset& all);

/// JSON Lines, one sample per line, floats with 17 significant digits.
void write_dataset(const std::filesystem::path& path, const Dataset& data);
/// Throws IoError on unreadable or malformed files.
Dataset read_dataset(const std::filesystem::path& path);

channel::MultipathScene to_scene(const Sample& s, const array::Vec3& ap);

}  // namespace eraloc
