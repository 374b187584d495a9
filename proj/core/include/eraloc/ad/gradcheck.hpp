// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "eraloc/ad/tape.hpp"

namespace eraloc::ad {

struct GradCheckOptions {
  double step = 1e-6;
  /// Coordinates sampled per parameter; 0 checks every coordinate.
  std::size_t coords_per_param = 0;
  std::uint64_t seed = 0;
  /// Denominator floor: rel = |a - n| / max(|a|, |n|, floor), with
  /// floor = max(abs_floor, loss_relative_floor * |loss|).
  double abs_floor = 1e-8;
  /// Extra floor proportional to |loss|. Central differences cannot resolve
  /// derivatives much below eps * |loss| / step, so tiny coordinates of a
  /// large loss are compared against this resolution limit instead.
  double loss_relative_floor = 0.0;
  /// Keep every checked coordinate in the report.
  bool keep_entries = false;
};

struct GradCheckEntry {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
  double loss = 0.0;
  std::vector<GradCheckEntry> entries;
};

/// Builds a scalar loss on the supplied tape.
using LossBuilder = std::function<Var(Tape&)>;

/// Compares tape gradients with central differences. Parameter gradients are
/// zeroed first and left holding the analytic gradient afterwards.
GradCheckReport grad_check(const LossBuilder& loss, std::span<Parameter* const> params,
                           const GradCheckOptions& options = {});

}  // namespace eraloc::ad
