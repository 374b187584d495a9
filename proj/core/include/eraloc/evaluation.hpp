// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "eraloc/config.hpp"
#include "eraloc/dataset.hpp"
#include "eraloc/policy.hpp"

namespace eraloc {

/// A model together with the configuration it was built from.
struct TrainedModel {
  RunConfig config;
  std::uint64_t seed = 0;
  std::unique_ptr<policy::ActiveSensingModel> model;
};

/// Rebuilds a model from a checkpoint directory (config read from its manifest).
/// A training output directory (one containing checkpoint/) is accepted too.
TrainedModel load_model(const std::filesystem::path& dir);

/// Position estimates [sample][stage]. Sample i draws its noise from
/// substream (noise_seed, i), so every method sees the same noise for the same
/// sample and pilot index. `snr_db` overrides the configured SNR.
std::vector<std::vector<std::array<double, 2>>> predict(const policy::ActiveSensingModel& model, const RunConfig& cfg,
                                                        const Dataset& data, std::uint64_t noise_seed, double snr_db);
std::vector<std::vector<std::array<double, 2>>> predict(const policy::ActiveSensingModel& model, const RunConfig& cfg,
                                                        const Dataset& data, std::uint64_t noise_seed);

/// sqrt(mean_i ||est[i][t] - ue_i||^2) per stage.
std::vector<double> rmse_per_stage(const std::vector<std::vector<std::array<double, 2>>>& estimates,
                                   const Dataset& data);

/// Per-stage RMSE averaged over noise seeds. Throws ConfigError if the model
/// does not match the configuration.
std::vector<double> eval_rmse(const policy::ActiveSensingModel& model, const RunConfig& cfg, const Dataset& data,
                              const std::vector<std::uint64_t>& noise_seeds);

/// Row-oriented CSV table; `write` also emits `<path>.meta.json` holding the
/// config hash and the seeds.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void write(const std::filesystem::path& path, std::uint64_t config_hash,
             const std::vector<std::uint64_t>& seeds) const;
};

std::string format_number(double v);

/// `stage,method,rmse` for one or more models (seed-mean per method).
Table stage_table(const std::vector<const TrainedModel*>& models, const Dataset& data, std::uint64_t noise_seed);

/// `snr_db,method,rmse`: final-stage RMSE of each method's models averaged over
/// seeds, with sigma recomputed per SNR point.
Table sweep_snr(const std::vector<const TrainedModel*>& models, const Dataset& data,
                const std::vector<double>& snr_db, std::uint64_t noise_seed);

/// Throws ConfigError unless every allocation satisfies T * L = budget.
void check_allocations(std::size_t budget, const std::vector<std::pair<std::size_t, std::size_t>>& allocations);

/// `stages,pilots_per_stage,method,rmse`: trains one model per allocation,
/// method and seed on `train_data` and reports seed-mean final RMSE on
/// `eval_data`. Checkpoints land under `out_dir` when it is non-empty.
Table sweep_budget(const RunConfig& cfg, std::size_t budget,
                   const std::vector<std::pair<std::size_t, std::size_t>>& allocations,
                   const std::vector<Method>& methods, const std::vector<std::uint64_t>& seeds,
                   const Dataset& train_data, const Dataset& eval_data, std::uint64_t noise_seed,
                   const std::filesystem::path& out_dir);

/// Per-stage beampatterns of one recorded episode.
struct BeamExport {
  array::AngularGrid grid;
  std::vector<std::vector<double>> power;  // [stage][direction]
  std::vector<double> half_power_fraction;  // [stage]
  std::vector<std::array<double, 2>> estimates;
  std::vector<channel::SensingConfig> configs;  // [stage]
};

BeamExport stage_beampatterns(const TrainedModel& tm, const Sample& sample, std::size_t n_theta, std::size_t n_phi,
                              std::uint64_t noise_seed);

struct BeamExportOptions {
  /// Also write `stage_<t>_substage_<l>.csv` for each pattern set.
  bool per_substage = false;
  /// Report power in dB relative to each file's peak.
  bool in_db = false;
};

/// Writes `stage_<t>.csv` (substage-averaged) per stage and `paths.json` with
/// the true path directions into `out_dir`.
BeamExport export_beampatterns(const TrainedModel& tm, const Sample& sample, std::size_t n_theta, std::size_t n_phi,
                               std::uint64_t noise_seed, const std::filesystem::path& out_dir,
                               const BeamExportOptions& options = {});

/// Mean -3 dB solid-angle fraction per stage over the given samples.
std::vector<double> mean_beam_spread(const TrainedModel& tm, const Dataset& samples, std::size_t n_theta,
                                     std::size_t n_phi, std::uint64_t noise_seed);

}  // namespace eraloc
