// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#include "eraloc/selftest.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "eraloc/config.hpp"
#include "eraloc/measurement.hpp"
#include "eraloc/policy.hpp"
#include "eraloc/training.hpp"

namespace eraloc {

namespace {
constexpr double kEpisodeLossRelativeFloor = 1e-5;
}  // namespace

ad::GradCheckReport episode_grad_check(std::uint64_t seed, ad::GradCheckOptions options) {
  RunConfig cfg;
  cfg.system.n_x = 2;
  cfg.system.n_y = 2;
  cfg.system.subcarriers = 4;
  cfg.system.pilots_per_stage = 2;
  cfg.system.stages = 2;
  cfg.system.max_degree = 1;
  cfg.model.d_model = 8;
  cfg.model.heads = 2;
  cfg.model.embed_dim = 8;
  cfg.model.lstm_hidden = 8;
  cfg.model.head_hidden = 8;
  cfg.model.ff_hidden = 8;
  cfg.validate();

  const auto ctx = cfg.sim_context();
  const auto ap = cfg.ap_position();
  const std::vector<std::complex<double>> pilot(cfg.system.subcarriers, {1.0, 0.0});
  Rng rng = make_rng(seed, {tag(Stream::kGradCheck), 1});
  std::uniform_real_distribution<double> pos(-cfg.system.region_half_width, cfg.system.region_half_width);
  constexpr std::size_t kBatch = 2;
  std::vector<channel::SceneResponse> responses;
  ad::Tensor truth({kBatch, 2});
  for (std::size_t b = 0; b < kBatch; ++b) {
    const std::array<double, 2> ue{pos(rng), pos(rng)};
    truth.at(b, 0) = ue[0];
    truth.at(b, 1) = ue[1];
    responses.push_back(channel::SceneResponse::build(channel::scene_from_position(ue, ap, cfg.system.paths, rng),
                                                      ctx.grid, ctx.geom, ctx.basis, pilot));
  }
  std::vector<const channel::SceneResponse*> ptrs;
  for (const auto& r : responses) ptrs.push_back(&r);

  policy::ActiveSensingModel model(cfg.policy_config(), seed);
  const auto betas = cfg.stage_weights();
  const ad::LossBuilder loss = [&](ad::Tape& tape) {
    const auto ep = policy::run_episode(model, tape, ptrs, cfg.system.stages, {});
    return weighted_mse(ep.estimates, tape.constant(truth), betas);
  };
  options.seed = seed;
  if (options.loss_relative_floor == 0.0) options.loss_relative_floor = kEpisodeLossRelativeFloor;
  const auto params = model.parameters().all();
  return ad::grad_check(loss, params, options);
}

namespace {

using Clock = std::chrono::steady_clock;

SelftestResult gram_test() {
  SelftestResult r{"harmonics_gram", true, "", 0.0};
  double worst = 0.0;
  for (int u = 0; u <= 6; ++u) {
    const harmonics::BasisSpec spec(u);
    const auto g = harmonics::gram_matrix(spec, harmonics::SphereQuadrature::for_basis(spec));
    const std::size_t k = spec.size();
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) worst = std::max(worst, std::abs(g[i * k + j] - (i == j ? 1.0 : 0.0)));
  }
  r.passed = worst < 1e-8;
  char buf[96];
  std::snprintf(buf, sizeof buf, "max |G - I| = %.3e over U = 0..6", worst);
  r.detail = buf;
  return r;
}

SelftestResult channel_test(std::uint64_t seed) {
  SelftestResult r{"channel_oracle", true, "", 0.0};
  Rng rng = make_rng(seed, {tag(Stream::kGradCheck), 2});
  std::uniform_int_distribution<int> n_dist(1, 8), m_dist(1, 16), p_dist(1, 4), u_dist(0, 2);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), pos(-30.0, 30.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = n_dist(rng);
    channel::OfdmGrid grid{static_cast<std::size_t>(m_dist(rng)), 960e3, 30e9};
    const auto geom = array::upa_geometry(n, 1, 0.5, grid.wavelength());
    const harmonics::BasisSpec spec(u_dist(rng));
    std::vector<harmonics::PatternCoefficients> coeffs;
    for (int a = 0; a < n; ++a) {
      std::vector<double> c(spec.size());
      for (double& v : c) v = unit(rng);
      coeffs.push_back(harmonics::project_unit(c));
    }
    const auto scene = channel::scene_from_position({pos(rng), pos(rng)}, {0.0, 0.0, 10.0}, p_dist(rng), rng);
    const auto h = channel::channel_matrix(scene, coeffs, grid, geom);
    double num = 0.0, den = 0.0;
    for (int a = 0; a < n; ++a) {
      for (std::size_t m = 0; m < grid.subcarriers; ++m) {
        std::complex<double> acc = 0.0;
        for (const auto& p : scene.paths) {
          const auto& u = p.dir.unit();
          const auto& rp = geom.positions[static_cast<std::size_t>(a)];
          const double steer = 2.0 * std::numbers::pi / geom.wavelength * (rp[0] * u[0] + rp[1] * u[1] + rp[2] * u[2]);
          const double delay = -2.0 * std::numbers::pi * p.tau * static_cast<double>(m) * grid.subcarrier_spacing;
          const double gain = harmonics::pattern_gain(coeffs[static_cast<std::size_t>(a)].values(), p.dir.theta(),
                                                      p.dir.phi());
          acc += p.alpha * gain * std::polar(1.0, steer) * std::polar(1.0, delay);
        }
        num += std::norm(h(static_cast<std::size_t>(a), m) - acc);
        den += std::norm(acc);
      }
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  r.passed = worst < 1e-12;
  char buf[96];
  std::snprintf(buf, sizeof buf, "max relative error = %.3e over 200 scenes", worst);
  r.detail = buf;
  return r;
}

SelftestResult gradcheck_test(std::uint64_t seed) {
  SelftestResult r{"episode_gradcheck", true, "", 0.0};
  const auto rep = episode_grad_check(seed, {});
  r.passed = rep.max_rel_error < 1e-4;
  char buf[192];
  std::snprintf(buf, sizeof buf, "max relative error = %.3e over %zu coordinates (worst: %s[%zu])", rep.max_rel_error,
                rep.coords_checked, rep.worst_param.c_str(), rep.worst_index);
  r.detail = buf;
  return r;
}

}  // namespace

std::vector<SelftestResult> run_selftests(std::uint64_t seed) {
  std::vector<SelftestResult> out;
  auto timed = [&](auto&& fn) {
    const auto t0 = Clock::now();
    SelftestResult r = fn();
    r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    out.push_back(std::move(r));
  };
  timed(gram_test);
  timed([&] { return channel_test(seed); });
  timed([&] { return gradcheck_test(seed); });
  return out;
}

}  // namespace eraloc
