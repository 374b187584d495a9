// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eraloc/ad/gradcheck.hpp"

namespace eraloc {

/// Finite-difference check of the full unrolled episode loss on a tiny
/// configuration (N=4, M=4, L=2, T=2, K=4, hidden 8, noiseless), covering
/// every parameter including the learned initial configuration. Uses a
/// loss-relative floor of 1e-5 unless the caller sets one.
ad::GradCheckReport episode_grad_check(std::uint64_t seed, ad::GradCheckOptions options);

struct SelftestResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Basis Gram matrices for U = 0..6, channel synthesis against a scalar loop
/// on random scenes, and the episode gradient check.
std::vector<SelftestResult> run_selftests(std::uint64_t seed);

}  // namespace eraloc
