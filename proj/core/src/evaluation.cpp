// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#include "eraloc/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "eraloc/ad/checkpoint.hpp"
#include "eraloc/errors.hpp"
#include "eraloc/measurement.hpp"
#include "eraloc/parallel.hpp"
#include "eraloc/training.hpp"
#include "json.hpp"

namespace eraloc {

using Estimates = std::vector<std::vector<std::array<double, 2>>>;

TrainedModel load_model(const std::filesystem::path& dir) {
  // A training output directory holds the checkpoint one level down.
  const auto checkpoint_dir =
      std::filesystem::exists(dir / "checkpoint" / "manifest.json") ? dir / "checkpoint" : dir;
  TrainedModel tm;
  tm.config = RunConfig::from_json(ad::read_checkpoint_config(checkpoint_dir));
  tm.seed = tm.config.train.seed;
  tm.model = std::make_unique<policy::ActiveSensingModel>(tm.config.policy_config(), tm.seed);
  ad::load_checkpoint(checkpoint_dir, tm.model->parameters(), nullptr);
  return tm;
}

namespace {

constexpr std::size_t kEvalChunk = 64;

void check_model_matches(const policy::ActiveSensingModel& model, const RunConfig& cfg) {
  const auto& a = model.config();
  const auto b = cfg.policy_config();
  if (a.antennas != b.antennas || a.subcarriers != b.subcarriers || a.substages != b.substages ||
      a.basis_size != b.basis_size || a.learn_patterns != b.learn_patterns) {
    throw ConfigError("model dimensions (N=" + std::to_string(a.antennas) + ", M=" + std::to_string(a.subcarriers) +
                      ", L=" + std::to_string(a.substages) + ", K=" + std::to_string(a.basis_size) +
                      ") do not match the configuration (N=" + std::to_string(b.antennas) +
                      ", M=" + std::to_string(b.subcarriers) + ", L=" + std::to_string(b.substages) +
                      ", K=" + std::to_string(b.basis_size) + ")");
  }
}

}  // namespace

Estimates predict(const policy::ActiveSensingModel& model, const RunConfig& cfg, const Dataset& data,
                  std::uint64_t noise_seed, double snr_db) {
  check_model_matches(model, cfg);
  const std::size_t stages = cfg.episode_stages();
  const std::size_t substages = cfg.episode_substages();
  const std::size_t m_sub = cfg.system.subcarriers;
  const auto ctx = cfg.sim_context();
  const auto noise_model = channel::NoiseModel::from_snr(snr_db, cfg.system.p_max);
  const auto ap = cfg.ap_position();
  const std::vector<std::complex<double>> pilot(m_sub, {1.0, 0.0});

  Estimates out(data.size());
  const std::size_t chunks = (data.size() + kEvalChunk - 1) / kEvalChunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = c * kEvalChunk;
    const std::size_t end = std::min(begin + kEvalChunk, data.size());
    const std::size_t b = end - begin;
    std::vector<channel::SceneResponse> responses(b);
    std::vector<const channel::SceneResponse*> ptrs(b);
    std::vector<std::uint64_t> seeds(b);
    for (std::size_t k = 0; k < b; ++k) {
      responses[k] = channel::SceneResponse::build(to_scene(data[begin + k], ap), ctx.grid, ctx.geom, ctx.basis, pilot);
      ptrs[k] = &responses[k];
      seeds[k] = substream_seed(noise_seed, {begin + k});
    }
    const auto noise = policy::draw_episode_noise(seeds, stages, substages, m_sub, noise_model.sigma());
    ad::Tape tape(false);
    const auto ep = policy::run_episode(model, tape, ptrs, stages, noise);
    for (std::size_t k = 0; k < b; ++k) {
      auto& row = out[begin + k];
      row.resize(stages);
      for (std::size_t t = 0; t < stages; ++t) {
        row[t] = {ep.estimates[t].value().at(k, 0), ep.estimates[t].value().at(k, 1)};
      }
    }
  });
  return out;
}

Estimates predict(const policy::ActiveSensingModel& model, const RunConfig& cfg, const Dataset& data,
                  std::uint64_t noise_seed) {
  return predict(model, cfg, data, noise_seed, cfg.system.snr_db);
}

std::vector<double> rmse_per_stage(const Estimates& estimates, const Dataset& data) {
  if (estimates.size() != data.size() || data.empty()) throw ShapeError("rmse: estimate/sample count mismatch");
  const std::size_t stages = estimates.front().size();
  std::vector<double> sq(stages, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (estimates[i].size() != stages) throw ShapeError("rmse: ragged stage count");
    for (std::size_t t = 0; t < stages; ++t) {
      const double dx = estimates[i][t][0] - data[i].ue[0];
      const double dy = estimates[i][t][1] - data[i].ue[1];
      sq[t] += dx * dx + dy * dy;
    }
  }
  for (double& v : sq) v = std::sqrt(v / static_cast<double>(data.size()));
  return sq;
}

std::vector<double> eval_rmse(const policy::ActiveSensingModel& model, const RunConfig& cfg, const Dataset& data,
                              const std::vector<std::uint64_t>& noise_seeds) {
  if (noise_seeds.empty()) throw ConfigError("eval_rmse needs at least one seed");
  std::vector<double> acc;
  for (std::uint64_t s : noise_seeds) {
    const auto r = rmse_per_stage(predict(model, cfg, data, s), data);
    if (acc.empty()) acc.assign(r.size(), 0.0);
    for (std::size_t t = 0; t < r.size(); ++t) acc[t] += r[t];
  }
  for (double& v : acc) v /= static_cast<double>(noise_seeds.size());
  return acc;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void Table::write(const std::filesystem::path& path, std::uint64_t config_hash,
                  const std::vector<std::uint64_t>& seeds) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  if (!out) throw IoError("failed writing " + path.string());

  nlohmann::json meta;
  meta["config_hash"] = hash_hex(config_hash);
  meta["seeds"] = seeds;
  std::ofstream m(path.string() + ".meta.json");
  if (!m) throw IoError("cannot write " + path.string() + ".meta.json");
  m << meta.dump(2) << '\n';
}

namespace {

// Groups models by method, preserving first-seen order.
std::vector<std::pair<Method, std::vector<const TrainedModel*>>> by_method(
    const std::vector<const TrainedModel*>& models) {
  std::vector<std::pair<Method, std::vector<const TrainedModel*>>> groups;
  for (const auto* tm : models) {
    const Method m = tm->config.model.method;
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == m; });
    if (it == groups.end()) {
      groups.push_back({m, {tm}});
    } else {
      it->second.push_back(tm);
    }
  }
  return groups;
}

}  // namespace

Table stage_table(const std::vector<const TrainedModel*>& models, const Dataset& data, std::uint64_t noise_seed) {
  Table table{{"stage", "method", "rmse"}, {}};
  for (const auto& [method, group] : by_method(models)) {
    std::vector<double> mean;
    for (const auto* tm : group) {
      const auto r = rmse_per_stage(predict(*tm->model, tm->config, data, noise_seed), data);
      if (mean.empty()) mean.assign(r.size(), 0.0);
      if (r.size() != mean.size()) throw ConfigError("models of one method disagree on the stage count");
      for (std::size_t t = 0; t < r.size(); ++t) mean[t] += r[t] / static_cast<double>(group.size());
    }
    for (std::size_t t = 0; t < mean.size(); ++t) {
      table.rows.push_back({std::to_string(t + 1), method_name(method), format_number(mean[t])});
    }
  }
  return table;
}

Table sweep_snr(const std::vector<const TrainedModel*>& models, const Dataset& data,
                const std::vector<double>& snr_db, std::uint64_t noise_seed) {
  Table table{{"snr_db", "method", "rmse"}, {}};
  const auto groups = by_method(models);
  for (double snr : snr_db) {
    for (const auto& [method, group] : groups) {
      double mean = 0.0;
      for (const auto* tm : group) {
        mean += rmse_per_stage(predict(*tm->model, tm->config, data, noise_seed, snr), data).back();
      }
      mean /= static_cast<double>(group.size());
      table.rows.push_back({format_number(snr), method_name(method), format_number(mean)});
    }
  }
  return table;
}

void check_allocations(std::size_t budget, const std::vector<std::pair<std::size_t, std::size_t>>& allocations) {
  for (const auto& [t, l] : allocations) {
    if (t == 0 || l == 0 || t * l != budget) {
      throw ConfigError("allocation (" + std::to_string(t) + ", " + std::to_string(l) + ") does not use the budget " +
                        std::to_string(budget));
    }
  }
}

Table sweep_budget(const RunConfig& cfg, std::size_t budget,
                   const std::vector<std::pair<std::size_t, std::size_t>>& allocations,
                   const std::vector<Method>& methods, const std::vector<std::uint64_t>& seeds,
                   const Dataset& train_data, const Dataset& eval_data, std::uint64_t noise_seed,
                   const std::filesystem::path& out_dir) {
  check_allocations(budget, allocations);
  if (seeds.empty()) throw ConfigError("sweep_budget needs at least one seed");
  Table table{{"stages", "pilots_per_stage", "method", "rmse"}, {}};
  for (const auto& [t, l] : allocations) {
    for (Method m : methods) {
      RunConfig c = cfg.with_allocation(t, l).for_method(m);
      double mean = 0.0;
      for (std::uint64_t s : seeds) {
        c.train.seed = s;
        TrainOptions opts;
        if (!out_dir.empty()) {
          opts.out_dir = out_dir / ("T" + std::to_string(t) + "_L" + std::to_string(l) + "_" + method_name(m) +
                                    "_seed" + std::to_string(s));
        }
        const auto res = train(c, train_data, eval_data, opts);
        mean += rmse_per_stage(predict(*res.trained.model, c, eval_data, noise_seed), eval_data).back();
      }
      mean /= static_cast<double>(seeds.size());
      table.rows.push_back({std::to_string(t), std::to_string(l), method_name(m), format_number(mean)});
    }
  }
  return table;
}

BeamExport stage_beampatterns(const TrainedModel& tm, const Sample& sample, std::size_t n_theta, std::size_t n_phi,
                              std::uint64_t noise_seed) {
  const auto& cfg = tm.config;
  check_model_matches(*tm.model, cfg);
  const auto ctx = cfg.sim_context();
  Rng rng(noise_seed);
  const auto trace =
      policy::run_episode(to_scene(sample, cfg.ap_position()), *tm.model, cfg.episode_stages(), ctx, rng, true);

  BeamExport ex;
  ex.grid = array::AngularGrid::regular(n_theta, n_phi);
  ex.estimates = trace.estimates;
  for (const auto& sc : trace.configs) {
    sc.validate(cfg.system.antennas(), cfg.system.p_max);
    ex.power.push_back(array::beampattern(sc.w, sc.coeffs, ctx.geom, ex.grid.directions));
    ex.half_power_fraction.push_back(array::half_power_solid_angle_fraction(ex.power.back(), ex.grid));
  }
  ex.configs = trace.configs;
  return ex;
}

BeamExport export_beampatterns(const TrainedModel& tm, const Sample& sample, std::size_t n_theta, std::size_t n_phi,
                               std::uint64_t noise_seed, const std::filesystem::path& out_dir,
                               const BeamExportOptions& options) {
  auto ex = stage_beampatterns(tm, sample, n_theta, n_phi, noise_seed);
  std::filesystem::create_directories(out_dir);
  const auto geom = tm.config.sim_context().geom;
  for (std::size_t t = 0; t < ex.power.size(); ++t) {
    const std::string stem = "stage_" + std::to_string(t + 1);
    array::write_beampattern_csv((out_dir / (stem + ".csv")).string(), ex.grid.directions, ex.power[t],
                                 options.in_db);
    if (!options.per_substage) continue;
    const auto& sc = ex.configs[t];
    for (std::size_t l = 0; l < sc.coeffs.size(); ++l) {
      const auto power = array::beampattern(sc.w, sc.coeffs[l], geom, ex.grid.directions);
      array::write_beampattern_csv((out_dir / (stem + "_substage_" + std::to_string(l + 1) + ".csv")).string(),
                                   ex.grid.directions, power, options.in_db);
    }
  }
  nlohmann::json j;
  j["ue"] = {sample.ue[0], sample.ue[1]};
  j["paths"] = nlohmann::json::array();
  for (const auto& p : sample.paths) {
    j["paths"].push_back({{"theta_rad", p.dir.theta()},
                          {"phi_rad", p.dir.phi()},
                          {"tau", p.tau},
                          {"alpha_abs", std::abs(p.alpha)}});
  }
  j["estimates"] = nlohmann::json::array();
  for (const auto& e : ex.estimates) j["estimates"].push_back({e[0], e[1]});
  j["half_power_fraction"] = ex.half_power_fraction;
  j["config_hash"] = hash_hex(tm.config.hash());
  j["noise_seed"] = noise_seed;
  std::ofstream out(out_dir / "paths.json");
  if (!out) throw IoError("cannot write " + (out_dir / "paths.json").string());
  out << j.dump(2) << '\n';
  return ex;
}

std::vector<double> mean_beam_spread(const TrainedModel& tm, const Dataset& samples, std::size_t n_theta,
                                     std::size_t n_phi, std::uint64_t noise_seed) {
  if (samples.empty()) throw ConfigError("beam spread needs at least one sample");
  std::vector<std::vector<double>> per(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    per[i] = stage_beampatterns(tm, samples[i], n_theta, n_phi, substream_seed(noise_seed, {i})).half_power_fraction;
  });
  std::vector<double> mean(per.front().size(), 0.0);
  for (const auto& v : per)
    for (std::size_t t = 0; t < v.size(); ++t) mean[t] += v[t] / static_cast<double>(samples.size());
  return mean;
}

}  // namespace eraloc
