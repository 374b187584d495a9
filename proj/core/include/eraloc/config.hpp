// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "eraloc/policy.hpp"

namespace eraloc {

enum class Method { kProposed, kDigitalOnly, kOneShot };

std::string method_name(Method m);
/// Throws ConfigError for unknown names.
Method parse_method(const std::string& name);

struct SystemConfig {
  int n_x = 3;
  int n_y = 3;
  double spacing_wavelengths = 0.5;
  int max_degree = 2;
  std::size_t subcarriers = 16;
  double subcarrier_spacing_hz = 960e3;
  double carrier_hz = 30e9;
  int paths = 2;
  std::size_t stages = 3;
  std::size_t pilots_per_stage = 4;
  double p_max = 1.0;
  double region_half_width = 30.0;
  double ap_height = 10.0;
  double snr_db = 10.0;

  std::size_t antennas() const noexcept { return static_cast<std::size_t>(n_x) * static_cast<std::size_t>(n_y); }
  std::size_t basis_size() const noexcept {
    return static_cast<std::size_t>(max_degree + 1) * static_cast<std::size_t>(max_degree + 1);
  }
};

struct ModelConfig {
  Method method = Method::kProposed;
  std::size_t d_model = 32;
  std::size_t heads = 2;
  std::size_t embed_dim = 64;
  std::size_t lstm_hidden = 64;
  std::size_t head_hidden = 64;
  std::size_t ff_hidden = 64;
};

struct TrainConfig {
  std::size_t sample_count = 2200;
  double split = 0.9091;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t epochs = 50;
  /// Empty means beta_t proportional to t.
  std::vector<double> stage_weights;
  double grad_clip = 1.0;
  /// Global seed; the CLI --seed flag overrides it.
  std::uint64_t seed = 0;

  std::size_t train_count() const noexcept;
};

struct EvalConfig {
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::vector<double> snr_db{-5, 0, 5, 10, 15, 20};
  std::size_t budget = 12;
  std::vector<std::pair<std::size_t, std::size_t>> allocations{{1, 12}, {2, 6}, {3, 4}, {4, 3}};
  std::vector<Method> methods{Method::kProposed, Method::kDigitalOnly};
  std::size_t beam_n_theta = 45;
  std::size_t beam_n_phi = 90;
};

/// Full experiment description: `system`, `model`, `train`, `eval` sections.
struct RunConfig {
  SystemConfig system;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;

  /// Parses and validates; unknown keys and type errors raise ConfigError
  /// naming the JSON pointer of the offending key.
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  std::string to_json() const;
  /// FNV-1a of the canonical JSON form.
  std::uint64_t hash() const;
  /// Throws ConfigError on violated cross-constraints.
  void validate() const;

  /// Copy adjusted for a method: one-shot collapses all pilots into a single
  /// stage and freezes patterns; digital-only freezes patterns.
  RunConfig for_method(Method m) const;
  /// Copy with a different stage/pilot split.
  RunConfig with_allocation(std::size_t stages, std::size_t pilots_per_stage) const;

  /// Stages per episode (1 for one-shot) and pilots per stage (the whole
  /// budget for one-shot).
  std::size_t episode_stages() const noexcept;
  std::size_t episode_substages() const noexcept;

  /// Normalized stage weights (sum 1, length = stages).
  std::vector<double> stage_weights() const;
  policy::PolicyConfig policy_config() const;
  policy::SimContext sim_context() const;
  array::Vec3 ap_position() const { return {0.0, 0.0, system.ap_height}; }
};

/// Desk-scale defaults used by tests and the bundled desk profile.
RunConfig desk_profile();

std::string hash_hex(std::uint64_t h);

}  // namespace eraloc
