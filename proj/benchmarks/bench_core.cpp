// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#include <benchmark/benchmark.h>

#include <random>

#include "eraloc/channel.hpp"
#include "eraloc/config.hpp"
#include "eraloc/dataset.hpp"
#include "eraloc/measurement.hpp"
#include "eraloc/policy.hpp"
#include "eraloc/training.hpp"

using namespace eraloc;

static void BM_EvalBasis(benchmark::State& state) {
  const harmonics::BasisSpec spec(static_cast<int>(state.range(0)));
  std::vector<double> out(spec.size());
  double t = 0.1;
  for (auto _ : state) {
    harmonics::eval_basis(t, 0.7, spec, out);
    benchmark::DoNotOptimize(out.data());
    t = t < 3.0 ? t + 1e-3 : 0.1;
  }
}
BENCHMARK(BM_EvalBasis)->Arg(2)->Arg(6);

static void BM_ChannelMatrix(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const channel::OfdmGrid grid{static_cast<std::size_t>(state.range(1)), 960e3, 30e9};
  const auto geom = array::upa_geometry(n, n, 0.5, grid.wavelength());
  const harmonics::BasisSpec spec(2);
  std::vector<harmonics::PatternCoefficients> coeffs(geom.size(), harmonics::PatternCoefficients::isotropic(spec));
  Rng rng(1);
  const auto scene = channel::scene_from_position({12.0, -7.0}, {0.0, 0.0, 10.0}, 3, rng);
  for (auto _ : state) {
    auto h = channel::channel_matrix(scene, coeffs, grid, geom);
    benchmark::DoNotOptimize(h.data().data());
  }
}
BENCHMARK(BM_ChannelMatrix)->Args({3, 16})->Args({5, 256});

namespace {

struct EpisodeFixture {
  RunConfig cfg = desk_profile();
  policy::ActiveSensingModel model{cfg.policy_config(), 0};
  std::vector<channel::SceneResponse> responses;
  std::vector<const channel::SceneResponse*> ptrs;
  std::vector<ad::Tensor> noise;
  ad::Tensor truth;

  explicit EpisodeFixture(std::size_t batch) : truth({batch, 2}) {
    const auto ctx = cfg.sim_context();
    const auto data = generate_dataset(cfg, 0, batch);
    const std::vector<std::complex<double>> pilot(cfg.system.subcarriers, {1.0, 0.0});
    std::vector<std::uint64_t> seeds;
    for (std::size_t b = 0; b < batch; ++b) {
      responses.push_back(
          channel::SceneResponse::build(to_scene(data[b], cfg.ap_position()), ctx.grid, ctx.geom, ctx.basis, pilot));
      truth.at(b, 0) = data[b].ue[0];
      truth.at(b, 1) = data[b].ue[1];
      seeds.push_back(b);
    }
    for (const auto& r : responses) ptrs.push_back(&r);
    noise = policy::draw_episode_noise(seeds, cfg.system.stages, cfg.system.pilots_per_stage, cfg.system.subcarriers,
                                       ctx.noise.sigma());
  }
};

}  // namespace

static void BM_EpisodeForward(benchmark::State& state) {
  EpisodeFixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    ad::Tape tape(false);
    auto ep = policy::run_episode(f.model, tape, f.ptrs, f.cfg.system.stages, f.noise);
    benchmark::DoNotOptimize(ep.estimates.back().value().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EpisodeForward)->Arg(32);

static void BM_EpisodeForwardBackward(benchmark::State& state) {
  EpisodeFixture f(static_cast<std::size_t>(state.range(0)));
  const auto betas = f.cfg.stage_weights();
  for (auto _ : state) {
    ad::Tape tape(true);
    auto ep = policy::run_episode(f.model, tape, f.ptrs, f.cfg.system.stages, f.noise);
    tape.backward(weighted_mse(ep.estimates, tape.constant(f.truth), betas));
    f.model.parameters().zero_grad();
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EpisodeForwardBackward)->Arg(32);

BENCHMARK_MAIN();
