// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "eraloc/ad/ops.hpp"
#include "eraloc/errors.hpp"
#include "eraloc/training.hpp"

using namespace eraloc;
namespace fs = std::filesystem;

namespace {

struct TmpDir {
  fs::path path;
  TmpDir() {
    path = fs::temp_directory_path() / ("eraloc_train_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TmpDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

struct Data {
  Dataset train, val;
};

Data small_data(const RunConfig& cfg, std::uint64_t seed, std::size_t n_train = 64, std::size_t n_val = 16) {
  const auto all = generate_dataset(cfg, seed, n_train + n_val);
  return {Dataset(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train)),
          Dataset(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end())};
}

std::vector<double> flat_params(const policy::ActiveSensingModel& m) {
  std::vector<double> out;
  for (const auto* p : m.parameters().all()) out.insert(out.end(), p->value.values().begin(), p->value.values().end());
  return out;
}

double mean_tail(const std::vector<double>& v, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = v.size() - n; i < v.size(); ++i) s += v[i];
  return s / static_cast<double>(n);
}

}  // namespace

TEST_CASE("weighted_mse examples") {
  using Est = std::vector<std::vector<std::array<double, 2>>>;
  const std::vector<std::array<double, 2>> truth{{1.0, 2.0}};
  const std::vector<double> betas{1.0 / 3.0, 2.0 / 3.0};
  CHECK(weighted_mse(Est{{{1.0, 2.0}, {1.0, 2.0}}}, truth, betas) == 0.0);
  // squared errors 1 and 4
  CHECK(weighted_mse(Est{{{2.0, 2.0}, {1.0, 4.0}}}, truth, betas) == doctest::Approx(3.0).epsilon(1e-15));
  const std::vector<double> scaled{2.0 / 3.0, 4.0 / 3.0};
  CHECK(weighted_mse(Est{{{2.0, 2.0}, {1.0, 4.0}}}, truth, scaled) == doctest::Approx(6.0));
  CHECK_THROWS_AS(weighted_mse(Est{{{2.0, 2.0}}}, truth, betas), ShapeError);
}

TEST_CASE("tape weighted_mse matches the plain version and is nonnegative") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t B = 4, T = 3;
    std::vector<std::vector<std::array<double, 2>>> est(B, std::vector<std::array<double, 2>>(T));
    std::vector<std::array<double, 2>> truth(B);
    ad::Tape tape(false);
    ad::Tensor tt({B, 2});
    std::vector<ad::Tensor> et(T, ad::Tensor({B, 2}));
    for (std::size_t b = 0; b < B; ++b) {
      truth[b] = {g(rng), g(rng)};
      tt.at(b, 0) = truth[b][0];
      tt.at(b, 1) = truth[b][1];
      for (std::size_t t = 0; t < T; ++t) {
        est[b][t] = {g(rng), g(rng)};
        et[t].at(b, 0) = est[b][t][0];
        et[t].at(b, 1) = est[b][t][1];
      }
    }
    std::vector<ad::Var> ev;
    for (auto& e : et) ev.push_back(tape.constant(e));
    const std::vector<double> betas{0.1, 0.3, 0.6};
    const double a = weighted_mse(ev, tape.constant(tt), betas).value()[0];
    CHECK(a >= 0.0);
    CHECK(a == doctest::Approx(weighted_mse(est, truth, betas)).epsilon(1e-13));
  }
}

TEST_CASE("training reduces the loss on a small set") {
  auto cfg = desk_profile();
  cfg.train.epochs = 100;  // 64 samples, batch 32 -> 200 steps
  const auto d = small_data(cfg, 1);
  const auto r = train(cfg, d.train, d.val);
  REQUIRE(r.report.step_losses.size() == 200);
  const double first = r.report.step_losses.front();
  // Late loss averaged over the last 10 steps to smooth batch and noise jitter.
  const double late = mean_tail(r.report.step_losses, 10);
  MESSAGE("step 1 loss " << first << ", late loss " << late);
  CHECK(late <= 0.5 * first);
  CHECK(r.report.epochs.size() == 100);
  CHECK(r.report.initial_val_rmse.size() == 3);
}

TEST_CASE("digital-only training also reduces the loss") {
  auto cfg = desk_profile().for_method(Method::kDigitalOnly);
  cfg.train.epochs = 100;
  const auto d = small_data(cfg, 2);
  const auto r = train(cfg, d.train, d.val);
  const double first = r.report.step_losses.front();
  const double late = mean_tail(r.report.step_losses, 10);
  MESSAGE("step 1 loss " << first << ", late loss " << late);
  CHECK(late <= 0.7 * first);
  for (const auto* p : r.trained.model->parameters().all()) CHECK(p->name.find("pattern") == std::string::npos);
}

TEST_CASE("zero learning rate leaves parameters and loss unchanged") {
  auto cfg = desk_profile();
  cfg.train.learning_rate = 0.0;
  cfg.train.epochs = 3;
  cfg.train.batch_size = 64;
  cfg.system.snr_db = 400.0;  // sigma ~ 1e-20, effectively noiseless
  const auto d = small_data(cfg, 3);
  const policy::ActiveSensingModel fresh(cfg.policy_config(), cfg.train.seed);
  const auto r = train(cfg, d.train, d.val);
  CHECK(flat_params(*r.trained.model) == flat_params(fresh));
  REQUIRE(r.report.step_losses.size() == 3);
  for (double l : r.report.step_losses) CHECK(l == doctest::Approx(r.report.step_losses[0]).epsilon(1e-12));
}

TEST_CASE("identical seeds give identical loss curves") {
  auto cfg = desk_profile();
  cfg.train.epochs = 2;
  cfg.train.seed = 9;
  const auto d = small_data(cfg, 4);
  const auto a = train(cfg, d.train, d.val);
  const auto b = train(cfg, d.train, d.val);
  REQUIRE(a.report.step_losses.size() == b.report.step_losses.size());
  for (std::size_t i = 0; i < a.report.step_losses.size(); ++i)
    CHECK(std::abs(a.report.step_losses[i] - b.report.step_losses[i]) <= 1e-9 * std::abs(a.report.step_losses[i]));
  CHECK(flat_params(*a.trained.model) == flat_params(*b.trained.model));
  cfg.train.seed = 10;
  const auto c = train(cfg, d.train, d.val);
  CHECK(c.report.step_losses != a.report.step_losses);
}

TEST_CASE("one step sends gradient into the initial configuration") {
  auto cfg = desk_profile();
  TrainOptions opt;
  opt.max_steps = 1;
  const auto d = small_data(cfg, 5);
  const auto r = train(cfg, d.train, d.val, opt);
  CHECK(r.report.step_losses.size() == 1);
  const auto& p = r.trained.model->initial_config_parameter();
  CHECK(std::sqrt(p.grad.squared_norm()) > 0.0);
  // the pattern part specifically (past the 2N combiner entries)
  double pattern_sq = 0.0;
  for (std::size_t i = 18; i < p.grad.size(); ++i) pattern_sq += p.grad[i] * p.grad[i];
  CHECK(pattern_sq > 0.0);
}

TEST_CASE("validation passes do not touch parameters") {
  const auto cfg = desk_profile();
  const policy::ActiveSensingModel model(cfg.policy_config(), 6);
  const auto data = generate_dataset(cfg, 6, 20);
  const auto before = flat_params(model);
  const auto est = predict(model, cfg, data, 123);
  CHECK(est.size() == 20);
  CHECK(flat_params(model) == before);
  for (const auto* p : model.parameters().all())
    for (double g : p->grad.values()) CHECK(g == 0.0);
}

TEST_CASE("training writes checkpoint, report and config") {
  TmpDir dir;
  auto cfg = desk_profile();
  cfg.train.epochs = 2;
  const auto d = small_data(cfg, 7);
  TrainOptions opt;
  opt.out_dir = dir.path;
  std::size_t callbacks = 0;
  opt.on_epoch = [&](const EpochRecord&) { ++callbacks; };
  const auto r = train(cfg, d.train, d.val, opt);
  CHECK(callbacks == 2);
  CHECK(fs::exists(dir.path / "checkpoint" / "manifest.json"));
  CHECK(fs::exists(dir.path / "checkpoint" / "data.bin"));
  std::ifstream csv(dir.path / "report.csv");
  std::string header, line;
  std::getline(csv, header);
  CHECK(header == "epoch,train_loss,val_rmse_stage_1,val_rmse_stage_2,val_rmse_stage_3,seconds");
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 2);

  std::ifstream cj(dir.path / "config.json");
  std::stringstream ss;
  ss << cj.rdbuf();
  const auto echoed = RunConfig::from_json(ss.str());
  CHECK(echoed.hash() == cfg.hash());

  // The checkpoint reloads to the returned (best) parameters.
  const auto loaded = load_model(dir.path / "checkpoint");
  CHECK(flat_params(*loaded.model) == flat_params(*r.trained.model));
  CHECK(loaded.config.hash() == cfg.hash());
}

TEST_CASE("the returned model is the best validation epoch") {
  auto cfg = desk_profile();
  cfg.train.epochs = 4;
  const auto d = small_data(cfg, 8);
  const auto r = train(cfg, d.train, d.val);
  double best = r.report.initial_val_rmse.back();
  for (const auto& e : r.report.epochs) best = std::min(best, e.val_rmse.back());
  const auto now = rmse_per_stage(
      predict(*r.trained.model, cfg, d.val, substream_seed(cfg.train.seed, {tag(Stream::kValNoise)})), d.val);
  CHECK(now.back() == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("divergence aborts with a diagnostic") {
  auto cfg = desk_profile();
  cfg.train.learning_rate = 1e300;
  cfg.train.epochs = 3;
  const auto d = small_data(cfg, 9);
  try {
    train(cfg, d.train, d.val);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch") != std::string::npos);
    CHECK(msg.find("batch") != std::string::npos);
    CHECK(msg.find("parameter norms") != std::string::npos);
  }
}

TEST_CASE("empty inputs are rejected") {
  const auto cfg = desk_profile();
  const auto d = small_data(cfg, 10, 4, 2);
  CHECK_THROWS_AS(train(cfg, {}, d.val), ConfigError);
  CHECK_THROWS_AS(train(cfg, d.train, {}), ConfigError);
}
