// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "eraloc/ad/tensor.hpp"

namespace eraloc::ad {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias-corrected moment estimates.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamOptions options);

  /// One update from the accumulated gradients. Throws StateError if no
  /// parameter has been through a backward pass yet.
  void step();

  std::uint64_t step_count() const noexcept { return steps_; }
  const AdamOptions& options() const noexcept { return options_; }
  void set_learning_rate(double lr) noexcept { options_.learning_rate = lr; }

  std::span<const Tensor> first_moments() const noexcept { return m_; }
  std::span<const Tensor> second_moments() const noexcept { return v_; }
  /// Restores state saved from an optimizer over the same parameter list.
  void restore(std::vector<Tensor> m, std::vector<Tensor> v, std::uint64_t steps);
  const std::vector<Parameter*>& parameters() const noexcept { return params_; }

 private:
  std::vector<Parameter*> params_;
  AdamOptions options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::uint64_t steps_ = 0;
};

/// Global L2 norm of all gradients.
double grad_norm(std::span<Parameter* const> params);

/// Rescales gradients so their global norm is at most `max_norm`; returns the
/// norm before clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

}  // namespace eraloc::ad
