// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace eraloc {

using Rng = std::mt19937_64;

/// Mixes a global seed with stream identifiers into an independent seed.
/// Every random stream in the library is derived this way so work can be
/// split across threads without changing results.
std::uint64_t substream_seed(std::uint64_t global_seed, std::initializer_list<std::uint64_t> ids);

inline Rng make_rng(std::uint64_t global_seed, std::initializer_list<std::uint64_t> ids) {
  return Rng(substream_seed(global_seed, ids));
}

/// Stream tags keep unrelated consumers of one seed apart.
enum class Stream : std::uint64_t {
  kDataset = 0x5d1,
  kInit = 0x1a7,
  kShuffle = 0x5f1,
  kTrainNoise = 0x7e4,
  kValNoise = 0x7a1,
  kEvalNoise = 0xe7a,
  kGradCheck = 0x6c4,
};

inline constexpr std::uint64_t tag(Stream s) { return static_cast<std::uint64_t>(s); }

}  // namespace eraloc
