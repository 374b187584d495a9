// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#include "eraloc/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "eraloc/errors.hpp"

namespace eraloc::channel {

namespace {

constexpr double kPi = std::numbers::pi;

double distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

Vec3 minus(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

}  // namespace

void OfdmGrid::validate() const {
  if (subcarriers < 1) throw ConfigError("subcarrier count must be >= 1");
  if (!(subcarrier_spacing > 0.0)) throw ConfigError("subcarrier spacing must be > 0");
  if (!(carrier_frequency > 0.0)) throw ConfigError("carrier frequency must be > 0");
}

MultipathScene scene_from_position(const std::array<double, 2>& ue, const Vec3& ap, int num_paths, Rng& rng,
                                   const SceneModel& model) {
  if (num_paths < 1) throw ConfigError("path count must be >= 1");
  const Vec3 ue3{ue[0], ue[1], 0.0};
  const double d = distance(ue3, ap);
  if (!(d > 1e-9)) throw GenerationError("UE coincides with the AP");

  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  std::uniform_real_distribution<double> horiz(-model.scatter_half_width, model.scatter_half_width);
  std::uniform_real_distribution<double> height(0.0, model.scatter_height);

  MultipathScene scene;
  scene.ue_position = ue;
  scene.ap_position = ap;

  PathParams los;
  los.tau = d / kSpeedOfLight;
  los.dir = Direction::from_vector(minus(ue3, ap));
  los.alpha = std::polar(model.reference_distance / d, phase(rng));
  scene.paths.push_back(los);

  for (int p = 1; p < num_paths; ++p) {
    Vec3 q{};
    double leg = 0.0;
    // Redraw a scatterer that lands on the AP; probability zero in practice.
    for (;;) {
      q[0] = horiz(rng);
      q[1] = horiz(rng);
      q[2] = height(rng);
      leg = distance(q, ap);
      if (leg > 1e-9) break;
    }
    PathParams nlos;
    nlos.tau = (leg + distance(q, ue3)) / kSpeedOfLight;
    nlos.dir = Direction::from_vector(minus(q, ap));
    nlos.alpha = std::polar(model.nlos_attenuation * model.reference_distance / (kSpeedOfLight * nlos.tau), phase(rng));
    scene.scatterers.push_back(q);
    scene.paths.push_back(nlos);
  }
  // LoS is always the shortest path; sort the NLoS paths and keep their
  // scatterers aligned.
  std::vector<std::size_t> order(scene.scatterers.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scene.paths[a + 1].tau < scene.paths[b + 1].tau; });
  MultipathScene sorted;
  sorted.ue_position = scene.ue_position;
  sorted.ap_position = scene.ap_position;
  sorted.paths.push_back(scene.paths.front());
  for (std::size_t i : order) {
    sorted.paths.push_back(scene.paths[i + 1]);
    sorted.scatterers.push_back(scene.scatterers[i]);
  }
  return sorted;
}

MultipathScene scene_from_paths(const std::array<double, 2>& ue, const Vec3& ap, std::vector<PathParams> paths) {
  if (paths.empty()) throw ConfigError("a scene needs at least one path");
  MultipathScene scene;
  scene.ue_position = ue;
  scene.ap_position = ap;
  scene.paths = std::move(paths);
  return scene;
}

CMatrix channel_matrix(const MultipathScene& scene, std::span<const harmonics::PatternCoefficients> coeffs,
                       const OfdmGrid& grid, const array::ArrayGeometry& geom) {
  const std::size_t n_ant = geom.size();
  if (coeffs.size() != n_ant) {
    throw ShapeError("got " + std::to_string(coeffs.size()) + " pattern vectors for " + std::to_string(n_ant) +
                     " antennas");
  }
  const std::size_t m_sc = grid.subcarriers;
  CMatrix h(n_ant, m_sc);
  std::vector<cdouble> phasor(m_sc);
  for (const auto& path : scene.paths) {
    const auto gains = array::gain_matrix(coeffs, path.dir);
    const auto a = array::steering_vector(geom, path.dir);
    // exp(-j 2 pi tau m df) by repeated multiplication would drift; evaluate directly.
    for (std::size_t m = 0; m < m_sc; ++m)
      phasor[m] = std::polar(1.0, -2.0 * kPi * path.tau * static_cast<double>(m) * grid.subcarrier_spacing);
    for (std::size_t n = 0; n < n_ant; ++n) {
      const cdouble base = path.alpha * gains[n] * a[n];
      for (std::size_t m = 0; m < m_sc; ++m) h(n, m) += base * phasor[m];
    }
  }
  return h;
}

NoiseModel NoiseModel::from_snr(double snr_db, double p_max) {
  if (!(p_max > 0.0)) throw ConfigError("p_max must be > 0");
  NoiseModel nm;
  nm.snr_db = snr_db;
  nm.p_max = p_max;
  nm.sigma2 = p_max * std::pow(10.0, -snr_db / 10.0);
  return nm;
}

NoiseModel NoiseModel::noiseless(double p_max) {
  NoiseModel nm;
  nm.p_max = p_max;
  nm.snr_db = std::numeric_limits<double>::infinity();
  nm.sigma2 = 0.0;
  return nm;
}

double NoiseModel::sigma() const noexcept { return std::sqrt(sigma2); }

std::vector<cdouble> standard_complex_noise(std::size_t count, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::numbers::sqrt2 / 2.0);
  std::vector<cdouble> xi(count);
  for (auto& v : xi) {
    const double re = normal(rng);
    const double im = normal(rng);
    v = {re, im};
  }
  return xi;
}

std::vector<cdouble> observe_with_noise(std::span<const cdouble> w, const CMatrix& h, std::span<const cdouble> pilot,
                                        const NoiseModel& noise, std::span<const cdouble> unit_noise) {
  if (w.size() != h.rows()) throw ShapeError("combiner length differs from channel rows");
  if (pilot.size() != h.cols()) throw ShapeError("pilot length differs from subcarrier count");
  if (unit_noise.size() != h.cols()) throw ShapeError("noise length differs from subcarrier count");
  double power = 0.0;
  for (const auto& v : w) power += std::norm(v);
  if (power > noise.p_max + 1e-9) {
    throw ConstraintError("combiner power " + std::to_string(power) + " exceeds budget " + std::to_string(noise.p_max));
  }
  const double sigma = noise.sigma();
  std::vector<cdouble> y(h.cols());
  for (std::size_t m = 0; m < h.cols(); ++m) {
    cdouble acc = 0.0;
    for (std::size_t n = 0; n < h.rows(); ++n) acc += std::conj(w[n]) * h(n, m);
    y[m] = acc * pilot[m] + sigma * unit_noise[m];
  }
  return y;
}

std::vector<cdouble> observe(std::span<const cdouble> w, const CMatrix& h, std::span<const cdouble> pilot,
                             const NoiseModel& noise, Rng& rng) {
  const auto xi = standard_complex_noise(h.cols(), rng);
  return observe_with_noise(w, h, pilot, noise, xi);
}

void SensingConfig::validate(std::size_t num_antennas, double p_max) const {
  if (w.size() != num_antennas) throw ShapeError("combiner length differs from array size");
  if (coeffs.empty()) throw ShapeError("sensing config has no substages");
  double power = 0.0;
  for (const auto& v : w) power += std::norm(v);
  if (power > p_max + 1e-9) throw ConstraintError("combiner power exceeds budget");
  for (const auto& set : coeffs) {
    if (set.size() != num_antennas) throw ShapeError("pattern set size differs from array size");
    for (const auto& c : set) {
      double sq = 0.0;
      for (double v : c.values()) sq += v * v;
      if (std::abs(std::sqrt(sq) - 1.0) > 1e-9) throw ConstraintError("pattern coefficients are not unit norm");
    }
  }
}

std::vector<std::vector<cdouble>> unit_pilots(std::size_t substages, std::size_t subcarriers) {
  return std::vector<std::vector<cdouble>>(substages, std::vector<cdouble>(subcarriers, cdouble(1.0, 0.0)));
}

ObservationMatrix collect_stage(const MultipathScene& scene, const SensingConfig& config, const OfdmGrid& grid,
                                const array::ArrayGeometry& geom, std::span<const std::vector<cdouble>> pilots,
                                const NoiseModel& noise, Rng& rng) {
  config.validate(geom.size(), noise.p_max);
  if (pilots.size() != config.substages()) throw ShapeError("pilot count differs from substage count");
  ObservationMatrix y(grid.subcarriers, config.substages());
  for (std::size_t l = 0; l < config.substages(); ++l) {
    const auto h = channel_matrix(scene, config.coeffs[l], grid, geom);
    const auto col = observe(config.w, h, pilots[l], noise, rng);
    for (std::size_t m = 0; m < grid.subcarriers; ++m) y(m, l) = col[m];
  }
  return y;
}

}  // namespace eraloc::channel
