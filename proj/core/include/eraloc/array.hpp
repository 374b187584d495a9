// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "eraloc/harmonics.hpp"

namespace eraloc::array {

using cdouble = std::complex<double>;
using Vec3 = std::array<double, 3>;

/// Arrival direction: polar angle theta in [0, pi], azimuth phi in [-pi, pi],
/// and the matching unit vector (sin t cos p, sin t sin p, cos t).
class Direction {
 public:
  Direction() = default;

  /// Throws DomainError for out-of-range angles.
  static Direction from_angles(double theta, double phi);
  /// Normalizes `v`; throws DomainError for a zero vector.
  static Direction from_vector(const Vec3& v);

  double theta() const noexcept { return theta_; }
  double phi() const noexcept { return phi_; }
  const Vec3& unit() const noexcept { return u_; }

 private:
  double theta_ = 0.0;
  double phi_ = 0.0;
  Vec3 u_{0.0, 0.0, 1.0};
};

struct ArrayGeometry {
  std::vector<Vec3> positions;  // meters
  double wavelength = 0.0;      // meters

  std::size_t size() const noexcept { return positions.size(); }
};

/// n_x * n_y elements on the z = 0 plane, centered at the origin, row-major
/// (x index fastest), pitch `spacing_wavelengths * wavelength`.
ArrayGeometry upa_geometry(int n_x, int n_y, double spacing_wavelengths, double wavelength);

/// [a(u)]_n = exp(j 2 pi / lambda r_n^T u).
std::vector<cdouble> steering_vector(const ArrayGeometry& geom, const Direction& dir);

/// Diagonal of D(theta, phi): one signed gain per antenna.
std::vector<double> gain_matrix(std::span<const harmonics::PatternCoefficients> coeffs, const Direction& dir);

/// |w^H D(dir) a(dir)|^2 per grid direction. When several substage pattern
/// sets are passed, the result is their average.
std::vector<double> beampattern(std::span<const cdouble> w,
                                std::span<const std::vector<harmonics::PatternCoefficients>> substage_coeffs,
                                const ArrayGeometry& geom, std::span<const Direction> grid);

/// Single pattern-set convenience overload.
std::vector<double> beampattern(std::span<const cdouble> w, std::span<const harmonics::PatternCoefficients> coeffs,
                                const ArrayGeometry& geom, std::span<const Direction> grid);

/// Regular (theta, phi) grid with cell-center sampling and sin(theta) solid-angle
/// weights; used for beampattern export and beam-spread measurement.
struct AngularGrid {
  std::vector<Direction> directions;
  std::vector<double> solid_angle;  // per direction, sums to ~4 pi
  std::size_t n_theta = 0;
  std::size_t n_phi = 0;

  static AngularGrid regular(std::size_t n_theta, std::size_t n_phi);
};

/// Fraction of the grid's solid angle whose power is within -3 dB of the peak.
double half_power_solid_angle_fraction(std::span<const double> power, const AngularGrid& grid);

/// Writes `theta_rad,phi_rad,power` with 9 significant digits. If `in_db` is
/// set, power is reported as 10 log10(power / peak). Throws IoError.
void write_beampattern_csv(const std::string& path, std::span<const Direction> grid, std::span<const double> power,
                           bool in_db = false);

}  // namespace eraloc::array
