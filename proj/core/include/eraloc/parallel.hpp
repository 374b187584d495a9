// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#pragma once

#include <cstddef>
#include <functional>

namespace eraloc {

/// Worker cap: ERA_LOC_THREADS if set to a positive integer, otherwise the
/// number of logical cores.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on up to worker_count() threads. Work is split
/// into contiguous blocks; fn must only write to index-owned state. The first
/// exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace eraloc
