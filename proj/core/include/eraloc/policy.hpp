// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "eraloc/ad/nn.hpp"
#include "eraloc/channel.hpp"
#include "eraloc/measurement.hpp"

namespace eraloc::policy {

struct PolicyConfig {
  std::size_t antennas = 9;     // N
  std::size_t subcarriers = 16; // M
  std::size_t substages = 4;    // L
  std::size_t basis_size = 9;   // K
  double p_max = 1.0;

  std::size_t d_model = 32;
  std::size_t heads = 2;
  std::size_t embed_dim = 64;   // d
  std::size_t lstm_hidden = 64;
  std::size_t head_hidden = 64;
  std::size_t ff_hidden = 64;

  /// False freezes every pattern to the isotropic mode (digital-only).
  bool learn_patterns = true;
  /// Position head output is multiplied by this (meters).
  double position_scale = 30.0;

  /// Length of the raw configuration vector: 2N, plus N*L*K with patterns.
  std::size_t raw_config_size() const noexcept;
  /// Throws ConfigError on violated cross-constraints (d < 2ML, H | d_model, ...).
  void validate() const;
};

/// Batched differentiable sensing configuration.
struct ConfigVars {
  ad::Var w;       // [B x 2N], interleaved re/im, ||w||^2 = p_max per row
  ad::Var coeffs;  // [B x L*N*K], unit-norm K-slices
};

using PolicyState = ad::LstmCell::State;

/// Attention encoder + LSTM + configuration and localization heads.
class ActiveSensingModel {
 public:
  /// Randomly initialized from `init_seed`.
  ActiveSensingModel(const PolicyConfig& config, std::uint64_t init_seed);
  ActiveSensingModel(const ActiveSensingModel&) = delete;
  ActiveSensingModel& operator=(const ActiveSensingModel&) = delete;
  ActiveSensingModel(ActiveSensingModel&&) = default;
  ActiveSensingModel& operator=(ActiveSensingModel&&) = default;

  const PolicyConfig& config() const noexcept { return config_; }
  ad::ParameterStore& parameters() noexcept { return *store_; }
  const ad::ParameterStore& parameters() const noexcept { return *store_; }

  /// Stage tokens [(B*L) x 2M] -> embeddings [B x d].
  ad::Var encode_stage(ad::Var tokens) const;
  /// Zero hidden and cell state for a batch.
  PolicyState initial_state(ad::Tape& tape, std::size_t batch) const;
  PolicyState update_state(ad::Var embedding, const PolicyState& prev) const;
  /// Learned stage-1 configuration, identical for every row of the batch.
  ConfigVars initial_config(ad::Tape& tape, std::size_t batch) const;
  /// Configuration for the next stage from the hidden state [B x hidden].
  ConfigVars next_config(ad::Var hidden) const;
  /// Position estimate [B x 2] in meters.
  ad::Var estimate_position(ad::Var hidden) const;

  /// Applies the power and unit-norm projections to a raw configuration
  /// vector [B x raw_config_size()].
  ConfigVars project(ad::Var raw) const;

  /// Extracts row `row` of a batched configuration.
  channel::SensingConfig to_sensing_config(const ConfigVars& vars, std::size_t row, int stage_index) const;

  ad::Parameter& initial_config_parameter() const noexcept { return *init_config_; }

 private:
  PolicyConfig config_;
  std::unique_ptr<ad::ParameterStore> store_;
  ad::Linear in_proj_;
  ad::Parameter* position_embedding_ = nullptr;
  ad::LayerNorm ln_attn_;
  ad::MultiHeadSelfAttention attn_;
  ad::LayerNorm ln_ff_;
  ad::Linear ff1_, ff2_;
  ad::Parameter* pool_query_ = nullptr;
  ad::Linear embed_out_;
  ad::LstmCell lstm_;
  ad::Mlp config_head_;
  ad::Mlp position_head_;
  ad::Parameter* init_config_ = nullptr;
};

/// Observation and simulation constants shared by all episodes of a run.
struct SimContext {
  channel::OfdmGrid grid;
  array::ArrayGeometry geom;
  harmonics::BasisSpec basis{2};
  channel::NoiseModel noise;
};

/// Tape handles produced by one batched episode.
struct EpisodeVars {
  std::vector<ad::Var> estimates;     // T x [B x 2]
  std::vector<ConfigVars> configs;    // T, configs[t] used at stage t+1
  std::vector<ad::Var> observations;  // T x [(B*L) x 2M], noisy tokens
};

/// Unit complex-normal draws for an episode, one stream per sample, already
/// scaled by `sigma` and laid out as stage tokens. Sample b draws T*L*M values
/// in (stage, substage, subcarrier) order from Rng(sample_seeds[b]).
std::vector<ad::Tensor> draw_episode_noise(std::span<const std::uint64_t> sample_seeds, std::size_t stages,
                                           std::size_t substages, std::size_t subcarriers, double sigma);

/// Closed-loop sensing: configure, observe, encode, update, estimate, and
/// (before the last stage) reconfigure. `stage_noise` holds T tensors from
/// `draw_episode_noise`, or is empty for noiseless operation. The scene
/// responses must outlive any backward pass over the tape.
EpisodeVars run_episode(const ActiveSensingModel& model, ad::Tape& tape,
                        std::span<const channel::SceneResponse* const> scenes, std::size_t stages,
                        std::span<const ad::Tensor> stage_noise);

/// Plain-value trace of a single-scene episode.
struct EpisodeTrace {
  std::vector<std::array<double, 2>> estimates;
  std::vector<channel::SensingConfig> configs;
  std::vector<channel::ObservationMatrix> observations;
};

/// Single-scene convenience wrapper. One draw from `rng` seeds the sample's
/// noise stream (layout as in `draw_episode_noise`). Configs and observations
/// are filled only when `record` is set.
EpisodeTrace run_episode(const channel::MultipathScene& scene, const ActiveSensingModel& model, std::size_t stages,
                         const SimContext& ctx, Rng& rng, bool record);

}  // namespace eraloc::policy
