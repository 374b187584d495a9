// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#include "eraloc/array.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "eraloc/errors.hpp"

namespace eraloc::array {

namespace {
constexpr double kPi = std::numbers::pi;
}

Direction Direction::from_angles(double theta, double phi) {
  if (!(theta >= 0.0 && theta <= kPi)) throw DomainError("theta outside [0, pi]");
  if (!(phi >= -kPi && phi <= kPi)) throw DomainError("phi outside [-pi, pi]");
  Direction d;
  d.theta_ = theta;
  d.phi_ = phi;
  const double s = std::sin(theta);
  d.u_ = {s * std::cos(phi), s * std::sin(phi), std::cos(theta)};
  return d;
}

Direction Direction::from_vector(const Vec3& v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("direction vector must be finite and nonzero");
  Direction d;
  d.u_ = {v[0] / n, v[1] / n, v[2] / n};
  d.theta_ = std::acos(std::clamp(d.u_[2], -1.0, 1.0));
  d.phi_ = std::atan2(d.u_[1], d.u_[0]);
  return d;
}

ArrayGeometry upa_geometry(int n_x, int n_y, double spacing_wavelengths, double wavelength) {
  if (n_x < 1 || n_y < 1) throw ConfigError("array dimensions must be >= 1");
  if (!(spacing_wavelengths > 0.0)) throw ConfigError("element spacing must be > 0");
  if (!(wavelength > 0.0)) throw ConfigError("wavelength must be > 0");
  ArrayGeometry g;
  g.wavelength = wavelength;
  const double pitch = spacing_wavelengths * wavelength;
  const double cx = 0.5 * (n_x - 1);
  const double cy = 0.5 * (n_y - 1);
  g.positions.reserve(static_cast<std::size_t>(n_x) * n_y);
  for (int j = 0; j < n_y; ++j)
    for (int i = 0; i < n_x; ++i) g.positions.push_back({(i - cx) * pitch, (j - cy) * pitch, 0.0});
  return g;
}

std::vector<cdouble> steering_vector(const ArrayGeometry& geom, const Direction& dir) {
  const double k = 2.0 * kPi / geom.wavelength;
  const auto& u = dir.unit();
  std::vector<cdouble> a(geom.size());
  for (std::size_t n = 0; n < geom.size(); ++n) {
    const auto& r = geom.positions[n];
    a[n] = std::polar(1.0, k * (r[0] * u[0] + r[1] * u[1] + r[2] * u[2]));
  }
  return a;
}

std::vector<double> gain_matrix(std::span<const harmonics::PatternCoefficients> coeffs, const Direction& dir) {
  if (coeffs.empty()) throw ShapeError("gain_matrix needs at least one antenna");
  const auto spec = harmonics::BasisSpec::from_size(coeffs.front().size());
  std::vector<double> gamma(spec.size());
  harmonics::eval_basis(dir.theta(), dir.phi(), spec, gamma);
  std::vector<double> gains(coeffs.size());
  for (std::size_t n = 0; n < coeffs.size(); ++n) {
    if (coeffs[n].size() != spec.size()) throw ShapeError("antennas disagree on coefficient length");
    double g = 0.0;
    for (std::size_t k = 0; k < spec.size(); ++k) g += gamma[k] * coeffs[n][k];
    gains[n] = g;
  }
  return gains;
}

std::vector<double> beampattern(std::span<const cdouble> w,
                                std::span<const std::vector<harmonics::PatternCoefficients>> substage_coeffs,
                                const ArrayGeometry& geom, std::span<const Direction> grid) {
  if (grid.empty()) throw ConfigError("beampattern grid is empty");
  if (substage_coeffs.empty()) throw ShapeError("beampattern needs at least one pattern set");
  if (w.size() != geom.size()) throw ShapeError("combiner length differs from array size");
  for (const auto& set : substage_coeffs)
    if (set.size() != geom.size()) throw ShapeError("pattern set size differs from array size");

  std::vector<double> power(grid.size(), 0.0);
  const double inv_sets = 1.0 / static_cast<double>(substage_coeffs.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto a = steering_vector(geom, grid[g]);
    double acc = 0.0;
    for (const auto& set : substage_coeffs) {
      const auto gains = gain_matrix(set, grid[g]);
      cdouble s = 0.0;
      for (std::size_t n = 0; n < w.size(); ++n) s += std::conj(w[n]) * gains[n] * a[n];
      acc += std::norm(s);
    }
    power[g] = acc * inv_sets;
  }
  return power;
}

std::vector<double> beampattern(std::span<const cdouble> w, std::span<const harmonics::PatternCoefficients> coeffs,
                                const ArrayGeometry& geom, std::span<const Direction> grid) {
  const std::vector<std::vector<harmonics::PatternCoefficients>> sets{{coeffs.begin(), coeffs.end()}};
  return beampattern(w, std::span<const std::vector<harmonics::PatternCoefficients>>(sets), geom, grid);
}

AngularGrid AngularGrid::regular(std::size_t n_theta, std::size_t n_phi) {
  if (n_theta == 0 || n_phi == 0) throw ConfigError("angular grid needs at least one cell per axis");
  AngularGrid grid;
  grid.n_theta = n_theta;
  grid.n_phi = n_phi;
  const double dt = kPi / static_cast<double>(n_theta);
  const double dp = 2.0 * kPi / static_cast<double>(n_phi);
  grid.directions.reserve(n_theta * n_phi);
  grid.solid_angle.reserve(n_theta * n_phi);
  for (std::size_t i = 0; i < n_theta; ++i) {
    const double t0 = i * dt;
    const double theta = t0 + 0.5 * dt;
    // exact cell solid angle: dp * (cos t0 - cos t1)
    const double omega = dp * (std::cos(t0) - std::cos(t0 + dt));
    for (std::size_t j = 0; j < n_phi; ++j) {
      grid.directions.push_back(Direction::from_angles(theta, -kPi + (j + 0.5) * dp));
      grid.solid_angle.push_back(omega);
    }
  }
  return grid;
}

double half_power_solid_angle_fraction(std::span<const double> power, const AngularGrid& grid) {
  if (power.size() != grid.directions.size()) throw ShapeError("power length differs from grid size");
  const double peak = *std::max_element(power.begin(), power.end());
  if (!(peak > 0.0)) return 1.0;
  const double threshold = 0.5 * peak;
  double inside = 0.0;
  double total = 0.0;
  for (std::size_t g = 0; g < power.size(); ++g) {
    total += grid.solid_angle[g];
    if (power[g] >= threshold) inside += grid.solid_angle[g];
  }
  return inside / total;
}

void write_beampattern_csv(const std::string& path, std::span<const Direction> grid, std::span<const double> power,
                           bool in_db) {
  if (grid.size() != power.size()) throw ShapeError("power length differs from grid size");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  double peak = 0.0;
  for (double p : power) peak = std::max(peak, p);
  out << "theta_rad,phi_rad,power\n";
  char line[128];
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double value = power[g];
    if (in_db) value = (peak > 0.0 && value > 0.0) ? 10.0 * std::log10(value / peak) : -300.0;
    std::snprintf(line, sizeof line, "%.9g,%.9g,%.9g\n", grid[g].theta(), grid[g].phi(), value);
    out << line;
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace eraloc::array
