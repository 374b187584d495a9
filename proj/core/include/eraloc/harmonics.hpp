// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace eraloc::harmonics {

/// Truncated real spherical-harmonic basis up to degree `max_degree`.
///
/// Functions are ordered degree-major, order-minor: index(l, m) = l*l + l + m
/// with m in [-l, l], so `size() == (max_degree + 1)^2`.
class BasisSpec {
 public:
  explicit BasisSpec(int max_degree);

  /// Infers the degree from a coefficient count; throws ShapeError when
  /// `size` is not a perfect square.
  static BasisSpec from_size(std::size_t size);

  int max_degree() const noexcept { return max_degree_; }
  std::size_t size() const noexcept { return size_; }

  static constexpr std::size_t index(int degree, int order) noexcept {
    return static_cast<std::size_t>(degree * degree + degree + order);
  }

 private:
  int max_degree_;
  std::size_t size_;
};

/// Unit-energy radiation pattern coefficients for one antenna and substage.
///
/// Construct through `project_unit`; the raw constructor is for frozen
/// patterns (e.g. the isotropic mode) and does not renormalize.
class PatternCoefficients {
 public:
  PatternCoefficients() = default;
  explicit PatternCoefficients(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {}

  /// Isotropic pattern: unit weight on the degree-0 harmonic.
  static PatternCoefficients isotropic(const BasisSpec& spec);

  std::span<const double> values() const noexcept { return coeffs_; }
  std::size_t size() const noexcept { return coeffs_.size(); }
  double operator[](std::size_t i) const { return coeffs_[i]; }

 private:
  std::vector<double> coeffs_;
};

/// Product quadrature on the sphere: Gauss-Legendre in cos(theta) times a
/// uniform azimuth grid. Weights include the sin(theta) Jacobian.
struct SphereQuadrature {
  std::vector<double> theta;         // polar nodes, radians
  std::vector<double> polar_weight;  // Gauss-Legendre weights in cos(theta)
  std::vector<double> phi;           // azimuth nodes, radians
  double azimuth_weight = 0.0;       // 2*pi / phi.size()

  std::size_t n_theta() const noexcept { return theta.size(); }
  std::size_t n_phi() const noexcept { return phi.size(); }
  double total_weight() const noexcept;

  /// Default resolution for `spec`: 2(U+1) polar nodes and 4U+4 azimuth nodes,
  /// exact for products of two harmonics of degree <= U.
  static SphereQuadrature for_basis(const BasisSpec& spec);
  static SphereQuadrature make(std::size_t n_theta, std::size_t n_phi);
};

/// Evaluates gamma(theta, phi) (length K) into `out`.
///
/// Orthonormal real harmonics without the Condon-Shortley phase; m > 0 uses
/// cos(m phi), m < 0 uses sin(|m| phi). Throws DomainError for theta outside
/// [0, pi] or phi outside [-pi, pi].
void eval_basis(double theta, double phi, const BasisSpec& spec, std::span<double> out);
std::vector<double> eval_basis(double theta, double phi, const BasisSpec& spec);

/// Signed amplitude gain gamma(theta, phi)^T c.
double pattern_gain(std::span<const double> coeffs, double theta, double phi);
inline double pattern_gain(const PatternCoefficients& c, double theta, double phi) {
  return pattern_gain(c.values(), theta, phi);
}

/// Numerically integrates G^2 over the sphere.
double pattern_energy(std::span<const double> coeffs, const SphereQuadrature& quad);

/// Smallest norm accepted by `project_unit`.
inline constexpr double kProjectEpsilon = 1e-9;

/// raw / ||raw||. Throws DegenerateInputError when ||raw|| <= kProjectEpsilon.
PatternCoefficients project_unit(std::span<const double> raw);

/// K x K Gram matrix of the basis under `quad`, row-major.
std::vector<double> gram_matrix(const BasisSpec& spec, const SphereQuadrature& quad);

}  // namespace eraloc::harmonics
