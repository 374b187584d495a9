// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#include <cmath>
#include <random>

#include "doctest.h"
#include "eraloc/ad/gradcheck.hpp"
#include "eraloc/ad/ops.hpp"
#include "eraloc/errors.hpp"
#include "eraloc/measurement.hpp"

using namespace eraloc;
using namespace eraloc::channel;
using harmonics::BasisSpec;
using harmonics::PatternCoefficients;

namespace {

struct Fixture {
  BasisSpec spec{2};
  array::ArrayGeometry geom = array::upa_geometry(2, 2, 0.5, kSpeedOfLight / 30e9);
  OfdmGrid grid{6, 960e3, 30e9};
  std::vector<MultipathScene> scenes;
  std::vector<SceneResponse> responses;
  std::vector<cdouble> pilot;

  explicit Fixture(std::size_t batch) {
    std::mt19937_64 prng(31);
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t m = 0; m < grid.subcarriers; ++m) pilot.push_back(std::polar(1.0, g(prng)));
    for (std::size_t b = 0; b < batch; ++b) {
      Rng rng(b + 1);
      scenes.push_back(scene_from_position({5.0 * static_cast<double>(b) - 7.0, 3.0}, {0.0, 0.0, 10.0}, 3, rng));
      responses.push_back(SceneResponse::build(scenes.back(), grid, geom, spec, pilot));
    }
  }
  std::vector<const SceneResponse*> ptrs() const {
    std::vector<const SceneResponse*> p;
    for (const auto& r : responses) p.push_back(&r);
    return p;
  }
};

}  // namespace

TEST_CASE("observe_tokens matches channel_matrix followed by observe") {
  const std::size_t batch = 3, L = 2, N = 4, K = 9;
  Fixture fx(batch);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 0.4);
  ad::Tensor w({batch, 2 * N}), c({batch, L * N * K});
  for (auto& v : w.values()) v = g(rng);
  for (auto& v : c.values()) v = g(rng);

  ad::Tape tape(false);
  const auto out = observe_tokens(tape.constant(w), tape.constant(c), fx.ptrs(), L);
  REQUIRE(out.shape() == ad::Shape{batch * L, 2 * fx.grid.subcarriers});

  for (std::size_t b = 0; b < batch; ++b) {
    std::vector<cdouble> wc(N);
    for (std::size_t n = 0; n < N; ++n) wc[n] = {w.at(b, 2 * n), w.at(b, 2 * n + 1)};
    for (std::size_t l = 0; l < L; ++l) {
      // Raw coefficients go straight in; the observation is linear in them.
      std::vector<PatternCoefficients> pats;
      for (std::size_t n = 0; n < N; ++n) {
        std::vector<double> raw(K);
        for (std::size_t k = 0; k < K; ++k) raw[k] = c.at(b, (l * N + n) * K + k);
        pats.emplace_back(raw);
      }
      const auto h = channel_matrix(fx.scenes[b], pats, fx.grid, fx.geom);
      double pw = 0.0;
      for (auto v : wc) pw += std::norm(v);
      Rng r(0);
      const auto y = observe(wc, h, fx.pilot, NoiseModel::noiseless(std::max(1.0, pw)), r);
      for (std::size_t m = 0; m < fx.grid.subcarriers; ++m) {
        CHECK(out.value().at(b * L + l, m) == doctest::Approx(y[m].real()).epsilon(1e-12));
        CHECK(out.value().at(b * L + l, fx.grid.subcarriers + m) == doctest::Approx(y[m].imag()).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("observe_tokens gradients match finite differences") {
  const std::size_t batch = 2, L = 3, N = 4, K = 9;
  Fixture fx(batch);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 0.5);
  ad::Parameter w("w", ad::Tensor({batch, 2 * N}));
  ad::Parameter c("c", ad::Tensor({batch, L * N * K}));
  for (auto& v : w.value.values()) v = g(rng);
  for (auto& v : c.value.values()) v = g(rng);
  ad::Tensor target({batch * L, 2 * fx.grid.subcarriers});
  for (auto& v : target.values()) v = g(rng);

  const auto scenes = fx.ptrs();
  auto loss = [&](ad::Tape& tape) {
    const auto y = observe_tokens(tape.param(w), tape.param(c), scenes, L);
    return ad::sum_squares(ad::sub(y, tape.constant(target)));
  };
  std::vector<ad::Parameter*> params{&w, &c};
  const auto report = ad::grad_check(loss, params);
  CHECK(report.coords_checked == w.value.size() + c.value.size());
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("observe_tokens shape checks") {
  Fixture fx(2);
  ad::Tape tape(false);
  const auto scenes = fx.ptrs();
  CHECK_THROWS_AS(observe_tokens(tape.constant(ad::Tensor({2, 7})), tape.constant(ad::Tensor({2, 36})), scenes, 1),
                  ShapeError);
  CHECK_THROWS_AS(observe_tokens(tape.constant(ad::Tensor({2, 8})), tape.constant(ad::Tensor({2, 36})), scenes, 2),
                  ShapeError);
  CHECK_THROWS_AS(observe_tokens(tape.constant(ad::Tensor({2, 8})), tape.constant(ad::Tensor({2, 36})),
                                 std::span<const SceneResponse* const>(), 1),
                  ShapeError);
  CHECK_THROWS_AS(SceneResponse::build(fx.scenes[0], fx.grid, fx.geom, fx.spec, std::vector<cdouble>(3, 1.0)),
                  ShapeError);
}
