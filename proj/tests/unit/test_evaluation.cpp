// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "eraloc/errors.hpp"
#include "eraloc/evaluation.hpp"
#include "json.hpp"

using namespace eraloc;
namespace fs = std::filesystem;
using Estimates = std::vector<std::vector<std::array<double, 2>>>;

namespace {

struct TmpDir {
  fs::path path;
  TmpDir() {
    path = fs::temp_directory_path() / ("eraloc_eval_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TmpDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

TrainedModel untrained(const RunConfig& cfg, std::uint64_t seed) {
  TrainedModel tm;
  tm.config = cfg;
  tm.config.train.seed = seed;
  tm.seed = seed;
  tm.model = std::make_unique<policy::ActiveSensingModel>(cfg.policy_config(), seed);
  return tm;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("rmse examples") {
  Dataset data(1);
  data[0].ue = {1.0, 1.0};
  CHECK(rmse_per_stage(Estimates{{{4.0, 5.0}}}, data) == std::vector<double>{5.0});
  CHECK(rmse_per_stage(Estimates{{{1.0, 1.0}, {1.0, 1.0}}}, data) == std::vector<double>{0.0, 0.0});
  CHECK_THROWS_AS(rmse_per_stage(Estimates{}, data), ShapeError);
}

TEST_CASE("rmse is invariant to sample order and matches a naive recomputation") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 10.0);
  Dataset data(50);
  Estimates est(50, std::vector<std::array<double, 2>>(3));
  for (std::size_t i = 0; i < 50; ++i) {
    data[i].ue = {g(rng), g(rng)};
    for (auto& e : est[i]) e = {g(rng), g(rng)};
  }
  const auto r = rmse_per_stage(est, data);
  std::vector<std::size_t> perm(50);
  for (std::size_t i = 0; i < 50; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  Dataset pd;
  Estimates pe;
  for (auto i : perm) {
    pd.push_back(data[i]);
    pe.push_back(est[i]);
  }
  const auto rp = rmse_per_stage(pe, pd);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(rp[t] == doctest::Approx(r[t]).epsilon(1e-14));
    long double acc = 0.0L;
    for (std::size_t i = 0; i < 50; ++i)
      acc += std::pow(static_cast<long double>(est[i][t][0] - data[i].ue[0]), 2) +
             std::pow(static_cast<long double>(est[i][t][1] - data[i].ue[1]), 2);
    CHECK(std::abs(r[t] - static_cast<double>(std::sqrt(acc / 50.0L))) <= 1e-12 * r[t]);
  }
}

TEST_CASE("predict pairs noise by sample index") {
  const auto cfg = desk_profile();
  const auto tm = untrained(cfg, 1);
  const auto data = generate_dataset(cfg, 2, 100);  // spans two evaluation chunks
  const auto full = predict(*tm.model, cfg, data, 77);
  REQUIRE(full.size() == 100);
  CHECK(full[0].size() == 3);
  const Dataset head(data.begin(), data.begin() + 10);
  const auto part = predict(*tm.model, cfg, head, 77);
  for (std::size_t i = 0; i < 10; ++i) CHECK(part[i] == full[i]);
  CHECK(predict(*tm.model, cfg, data, 77) == full);
  CHECK(predict(*tm.model, cfg, data, 78) != full);
}

TEST_CASE("predict agrees with a single-scene noiseless episode at very high SNR") {
  const auto cfg = desk_profile();
  const auto tm = untrained(cfg, 3);
  const auto data = generate_dataset(cfg, 4, 5);
  const auto est = predict(*tm.model, cfg, data, 1, 400.0);
  auto ctx = cfg.sim_context();
  ctx.noise = channel::NoiseModel::noiseless(1.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    Rng rng(0);
    const auto tr = policy::run_episode(to_scene(data[i], cfg.ap_position()), *tm.model, 3, ctx, rng, false);
    for (std::size_t t = 0; t < 3; ++t) {
      CHECK(est[i][t][0] == doctest::Approx(tr.estimates[t][0]).epsilon(1e-9));
      CHECK(est[i][t][1] == doctest::Approx(tr.estimates[t][1]).epsilon(1e-9));
    }
  }
}

TEST_CASE("eval_rmse averages over seeds and checks dimensions") {
  const auto cfg = desk_profile();
  const auto tm = untrained(cfg, 5);
  const auto data = generate_dataset(cfg, 6, 30);
  const auto a = rmse_per_stage(predict(*tm.model, cfg, data, 10), data);
  const auto b = rmse_per_stage(predict(*tm.model, cfg, data, 11), data);
  const auto m = eval_rmse(*tm.model, cfg, data, {10, 11});
  for (std::size_t t = 0; t < 3; ++t) CHECK(m[t] == doctest::Approx(0.5 * (a[t] + b[t])).epsilon(1e-14));
  CHECK_THROWS_AS(eval_rmse(*tm.model, cfg, data, {}), ConfigError);
  CHECK_THROWS_AS(eval_rmse(*tm.model, cfg.with_allocation(2, 6), data, {1}), ConfigError);
  CHECK_THROWS_AS(eval_rmse(*tm.model, cfg.for_method(Method::kDigitalOnly), data, {1}), ConfigError);
}

TEST_CASE("one-shot models produce a single stage") {
  const auto cfg = desk_profile().for_method(Method::kOneShot);
  const auto tm = untrained(cfg, 7);
  const auto data = generate_dataset(cfg, 8, 6);
  const auto est = predict(*tm.model, cfg, data, 1);
  for (const auto& row : est) CHECK(row.size() == 1);
  CHECK(eval_rmse(*tm.model, cfg, data, {1}).size() == 1);
  CHECK(tm.model->config().substages == 12);
}

TEST_CASE("stage and snr tables") {
  TmpDir dir;
  const auto cfg = desk_profile();
  const auto p0 = untrained(cfg, 0), p1 = untrained(cfg, 1);
  const auto d0 = untrained(cfg.for_method(Method::kDigitalOnly), 0);
  const std::vector<const TrainedModel*> models{&p0, &d0, &p1};
  const auto data = generate_dataset(cfg, 9, 20);

  const auto st = stage_table(models, data, 3);
  CHECK(st.header == std::vector<std::string>{"stage", "method", "rmse"});
  CHECK(st.rows.size() == 6);
  CHECK(st.rows[0][1] == "proposed");
  CHECK(st.rows[3][1] == "digital_only");
  // seed mean of the two proposed models
  const double r0 = rmse_per_stage(predict(*p0.model, cfg, data, 3), data)[0];
  const double r1 = rmse_per_stage(predict(*p1.model, cfg, data, 3), data)[0];
  CHECK(std::stod(st.rows[0][2]) == doctest::Approx(0.5 * (r0 + r1)).epsilon(1e-8));

  const std::vector<double> snrs{0.0, 10.0, 10.0};
  const auto sw = sweep_snr(models, data, snrs, 3);
  CHECK(sw.rows.size() == snrs.size() * 2);
  CHECK(sw.rows[2] == sw.rows[4]);
  CHECK(sw.rows[3] == sw.rows[5]);
  for (const auto& row : sw.rows) CHECK(std::stod(row[2]) >= 0.0);

  sw.write(dir.path / "snr.csv", cfg.hash(), {0, 1});
  CHECK(count_lines(dir.path / "snr.csv") == 7);
  std::ifstream meta(dir.path / "snr.csv.meta.json");
  const auto j = nlohmann::json::parse(meta);
  CHECK(j.at("config_hash").get<std::string>() == hash_hex(cfg.hash()));
  CHECK(j.at("seeds") == nlohmann::json::array({0, 1}));
}

TEST_CASE("budget allocations") {
  CHECK_NOTHROW(check_allocations(12, {{1, 12}, {2, 6}, {3, 4}, {4, 3}}));
  CHECK_THROWS_AS(check_allocations(12, {{5, 3}}), ConfigError);
  CHECK_THROWS_AS(check_allocations(12, {{0, 12}}), ConfigError);

  TmpDir dir;
  auto cfg = desk_profile();
  cfg.train.epochs = 1;
  cfg.model.embed_dim = 16;
  cfg.eval.budget = 4;
  cfg.eval.allocations = {{1, 4}, {2, 2}};
  const auto data = generate_dataset(cfg, 10, 40);
  const Dataset tr(data.begin(), data.begin() + 32), ev(data.begin() + 32, data.end());
  const auto table = sweep_budget(cfg, 4, cfg.eval.allocations, {Method::kProposed, Method::kDigitalOnly}, {0}, tr,
                                  ev, 5, dir.path);
  CHECK(table.header == std::vector<std::string>{"stages", "pilots_per_stage", "method", "rmse"});
  CHECK(table.rows.size() == 4);
  for (const auto& row : table.rows) CHECK(std::stoul(row[0]) * std::stoul(row[1]) == 4);
  CHECK(fs::exists(dir.path / "T2_L2_digital_only_seed0" / "checkpoint" / "manifest.json"));
  CHECK_THROWS_AS(sweep_budget(cfg, 4, {{3, 1}}, {Method::kProposed}, {0}, tr, ev, 5, ""), ConfigError);
}

TEST_CASE("beampattern export") {
  TmpDir dir;
  const auto cfg = desk_profile().with_allocation(3, 6);
  const auto tm = untrained(cfg, 11);
  const auto data = generate_dataset(cfg, 12, 3);
  BeamExportOptions opt;
  opt.per_substage = true;
  const auto ex = export_beampatterns(tm, data[0], 10, 20, 4, dir.path, opt);
  CHECK(ex.power.size() == 3);
  CHECK(ex.half_power_fraction.size() == 3);
  for (std::size_t t = 1; t <= 3; ++t) {
    CHECK(fs::exists(dir.path / ("stage_" + std::to_string(t) + ".csv")));
    CHECK(count_lines(dir.path / ("stage_" + std::to_string(t) + ".csv")) == 201);
    for (std::size_t l = 1; l <= 6; ++l)
      CHECK(fs::exists(dir.path / ("stage_" + std::to_string(t) + "_substage_" + std::to_string(l) + ".csv")));
  }
  CHECK_FALSE(fs::exists(dir.path / "stage_4.csv"));
  for (const auto& p : ex.power)
    for (double v : p) CHECK(v >= 0.0);
  for (double f : ex.half_power_fraction) {
    CHECK(f > 0.0);
    CHECK(f <= 1.0);
  }

  std::ifstream pj(dir.path / "paths.json");
  const auto j = nlohmann::json::parse(pj);
  CHECK(j.at("paths").size() == 2);
  CHECK(j.at("paths")[0].at("theta_rad").get<double>() == data[0].paths[0].dir.theta());
  CHECK(j.at("estimates").size() == 3);
  CHECK(j.at("config_hash").get<std::string>() == hash_hex(tm.config.hash()));

  // Stage powers match a direct beampattern of the recorded configs.
  const auto geom = cfg.sim_context().geom;
  const auto direct = array::beampattern(ex.configs[1].w, ex.configs[1].coeffs, geom, ex.grid.directions);
  for (std::size_t g = 0; g < direct.size(); ++g) CHECK(ex.power[1][g] == doctest::Approx(direct[g]).epsilon(1e-12));

  TmpDir db;
  opt.per_substage = false;
  opt.in_db = true;
  export_beampatterns(tm, data[0], 10, 20, 4, db.path, opt);
  std::ifstream csv(db.path / "stage_1.csv");
  std::string line;
  std::getline(csv, line);
  double peak = -1e9;
  while (std::getline(csv, line)) peak = std::max(peak, std::stod(line.substr(line.rfind(',') + 1)));
  CHECK(peak == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("mean beam spread averages per-sample fractions") {
  const auto cfg = desk_profile();
  const auto tm = untrained(cfg, 13);
  const auto data = generate_dataset(cfg, 14, 4);
  const auto mean = mean_beam_spread(tm, data, 8, 16, 21);
  REQUIRE(mean.size() == 3);
  std::vector<double> acc(3, 0.0);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto ex = stage_beampatterns(tm, data[i], 8, 16, substream_seed(21, {i}));
    for (std::size_t t = 0; t < 3; ++t) acc[t] += ex.half_power_fraction[t] / 4.0;
  }
  for (std::size_t t = 0; t < 3; ++t) CHECK(mean[t] == doctest::Approx(acc[t]).epsilon(1e-14));
  CHECK_THROWS_AS(mean_beam_spread(tm, {}, 8, 16, 1), ConfigError);
}

TEST_CASE("loading a missing checkpoint fails") {
  CHECK_THROWS_AS(load_model("/nonexistent/eraloc/checkpoint"), IoError);
}
