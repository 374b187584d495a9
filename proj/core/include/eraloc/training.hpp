// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "eraloc/ad/tape.hpp"
#include "eraloc/config.hpp"
#include "eraloc/dataset.hpp"
#include "eraloc/evaluation.hpp"

namespace eraloc {

/// sum_t betas[t] * mean_b ||estimates[t][b] - truth[b]||^2 on the tape.
/// Estimates are T tensors [B x 2], truth is [B x 2].
ad::Var weighted_mse(std::span<const ad::Var> estimates, ad::Var truth, std::span<const double> betas);

/// Plain version; estimates are [sample][stage].
double weighted_mse(const std::vector<std::vector<std::array<double, 2>>>& estimates,
                    const std::vector<std::array<double, 2>>& truth, std::span<const double> betas);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::vector<double> val_rmse;  // per stage
  double seconds = 0.0;
};

struct TrainReport {
  std::uint64_t seed = 0;
  std::string config_json;
  std::vector<double> initial_val_rmse;  // before the first update
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  std::vector<double> step_losses;

  /// `epoch,train_loss,val_rmse_stage_1..T,seconds`.
  void write_csv(const std::filesystem::path& path) const;
};

struct TrainOptions {
  /// When set: `checkpoint/` (best validation), `report.csv`, `config.json`.
  std::filesystem::path out_dir;
  /// Stop after this many optimizer steps (0 = run all epochs).
  std::size_t max_steps = 0;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  TrainedModel trained;
  TrainReport report;
};

/// Supervised end-to-end training through the simulated observation model.
/// The returned model holds the parameters with the best final-stage
/// validation RMSE. A non-finite value aborts with NumericError naming the
/// epoch, the batch and the largest parameter norms.
TrainResult train(const RunConfig& cfg, const Dataset& train_data, const Dataset& val_data,
                  const TrainOptions& options = {});

}  // namespace eraloc
