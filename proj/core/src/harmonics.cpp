// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#include "eraloc/harmonics.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "eraloc/errors.hpp"

namespace eraloc::harmonics {

namespace {

constexpr double kPi = std::numbers::pi;

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const double nd = static_cast<double>(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (static_cast<double>(i) + 0.75) / (nd + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double kd = static_cast<double>(k);
        const double p2 = ((2.0 * kd - 1.0) * x * p1 - (kd - 1.0) * p0) / kd;
        p0 = p1;
        p1 = p2;
      }
      dp = nd * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute derivative at the converged node.
    double p0 = 1.0;
    double p1 = x;
    for (std::size_t k = 2; k <= n; ++k) {
      const double kd = static_cast<double>(k);
      const double p2 = ((2.0 * kd - 1.0) * x * p1 - (kd - 1.0) * p0) / kd;
      p0 = p1;
      p1 = p2;
    }
    dp = nd * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) nodes[n / 2] = 0.0;
}

void check_quadrature(const BasisSpec& spec, const SphereQuadrature& quad) {
  const auto u = static_cast<std::size_t>(spec.max_degree());
  if (quad.n_theta() < u + 1 || quad.n_phi() < 4 * u + 1) {
    throw ConfigError("sphere quadrature too coarse for degree " + std::to_string(u) + ": need n_theta >= " +
                      std::to_string(u + 1) + " and n_phi >= " + std::to_string(4 * u + 1));
  }
}

}  // namespace

BasisSpec::BasisSpec(int max_degree) : max_degree_(max_degree) {
  if (max_degree < 0) throw ConfigError("harmonic degree must be >= 0");
  const auto n = static_cast<std::size_t>(max_degree) + 1;
  size_ = n * n;
}

BasisSpec BasisSpec::from_size(std::size_t size) {
  const auto root = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(size))));
  if (size == 0 || root * root != size) {
    throw ShapeError("coefficient count " + std::to_string(size) + " is not (U+1)^2");
  }
  return BasisSpec(static_cast<int>(root) - 1);
}

PatternCoefficients PatternCoefficients::isotropic(const BasisSpec& spec) {
  std::vector<double> c(spec.size(), 0.0);
  c[0] = 1.0;
  return PatternCoefficients(std::move(c));
}

double SphereQuadrature::total_weight() const noexcept {
  double s = 0.0;
  for (double w : polar_weight) s += w;
  return s * azimuth_weight * static_cast<double>(phi.size());
}

SphereQuadrature SphereQuadrature::make(std::size_t n_theta, std::size_t n_phi) {
  if (n_theta == 0 || n_phi == 0) throw ConfigError("sphere quadrature needs at least one node per axis");
  SphereQuadrature q;
  std::vector<double> x;
  gauss_legendre(n_theta, x, q.polar_weight);
  q.theta.resize(n_theta);
  // Nodes ascending in cos(theta) -> descending theta; keep theta ascending.
  for (std::size_t i = 0; i < n_theta; ++i) q.theta[i] = std::acos(x[n_theta - 1 - i]);
  std::vector<double> w = q.polar_weight;
  for (std::size_t i = 0; i < n_theta; ++i) q.polar_weight[i] = w[n_theta - 1 - i];
  q.phi.resize(n_phi);
  const double step = 2.0 * kPi / static_cast<double>(n_phi);
  for (std::size_t j = 0; j < n_phi; ++j) q.phi[j] = -kPi + (static_cast<double>(j) + 0.5) * step;
  q.azimuth_weight = step;
  return q;
}

SphereQuadrature SphereQuadrature::for_basis(const BasisSpec& spec) {
  const auto u = static_cast<std::size_t>(spec.max_degree());
  return make(2 * (u + 1), 4 * u + 4);
}

void eval_basis(double theta, double phi, const BasisSpec& spec, std::span<double> out) {
  if (!(theta >= 0.0 && theta <= kPi)) throw DomainError("theta outside [0, pi]: " + std::to_string(theta));
  if (!(phi >= -kPi && phi <= kPi)) throw DomainError("phi outside [-pi, pi]: " + std::to_string(phi));
  if (out.size() != spec.size()) throw ShapeError("basis output length mismatch");

  const int lmax = spec.max_degree();
  const double x = std::cos(theta);
  const double s = std::sin(theta);

  // Normalized associated Legendre Q_l^m = sqrt((2l+1)/(4pi) (l-m)!/(l+m)!) P_l^m,
  // no Condon-Shortley phase. Upward recurrence in l for each m.
  double qmm = 1.0 / std::sqrt(4.0 * kPi);
  for (int m = 0; m <= lmax; ++m) {
    if (m > 0) qmm *= std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s;
    const double cos_m = (m == 0) ? 1.0 : std::numbers::sqrt2 * std::cos(m * phi);
    const double sin_m = std::numbers::sqrt2 * std::sin(m * phi);

    double q_lm2 = 0.0;
    double q_lm1 = qmm;
    for (int l = m; l <= lmax; ++l) {
      double q;
      if (l == m) {
        q = qmm;
      } else if (l == m + 1) {
        q = std::sqrt(2.0 * m + 3.0) * x * qmm;
      } else {
        const double ll = static_cast<double>(l) * l;
        const double mm = static_cast<double>(m) * m;
        const double a = std::sqrt((4.0 * ll - 1.0) / (ll - mm));
        const double lp = static_cast<double>(l - 1);
        const double b = std::sqrt((lp * lp - mm) / (4.0 * lp * lp - 1.0));
        q = a * (x * q_lm1 - b * q_lm2);
      }
      if (l > m) {
        q_lm2 = q_lm1;
        q_lm1 = q;
      }
      if (m == 0) {
        out[BasisSpec::index(l, 0)] = q;
      } else {
        out[BasisSpec::index(l, m)] = q * cos_m;
        out[BasisSpec::index(l, -m)] = q * sin_m;
      }
    }
  }
}

std::vector<double> eval_basis(double theta, double phi, const BasisSpec& spec) {
  std::vector<double> out(spec.size());
  eval_basis(theta, phi, spec, out);
  return out;
}

double pattern_gain(std::span<const double> coeffs, double theta, double phi) {
  const auto spec = BasisSpec::from_size(coeffs.size());
  thread_local std::vector<double> gamma;
  gamma.resize(spec.size());
  eval_basis(theta, phi, spec, gamma);
  double g = 0.0;
  for (std::size_t k = 0; k < coeffs.size(); ++k) g += gamma[k] * coeffs[k];
  return g;
}

double pattern_energy(std::span<const double> coeffs, const SphereQuadrature& quad) {
  const auto spec = BasisSpec::from_size(coeffs.size());
  check_quadrature(spec, quad);
  std::vector<double> gamma(spec.size());
  double energy = 0.0;
  for (std::size_t i = 0; i < quad.n_theta(); ++i) {
    double ring = 0.0;
    for (std::size_t j = 0; j < quad.n_phi(); ++j) {
      eval_basis(quad.theta[i], quad.phi[j], spec, gamma);
      double g = 0.0;
      for (std::size_t k = 0; k < gamma.size(); ++k) g += gamma[k] * coeffs[k];
      ring += g * g;
    }
    energy += quad.polar_weight[i] * ring;
  }
  return energy * quad.azimuth_weight;
}

PatternCoefficients project_unit(std::span<const double> raw) {
  double sq = 0.0;
  for (double v : raw) sq += v * v;
  const double norm = std::sqrt(sq);
  if (!(norm > kProjectEpsilon)) {
    throw DegenerateInputError("cannot project a vector of norm " + std::to_string(norm) + " onto the unit sphere");
  }
  std::vector<double> out(raw.begin(), raw.end());
  for (double& v : out) v /= norm;
  return PatternCoefficients(std::move(out));
}

std::vector<double> gram_matrix(const BasisSpec& spec, const SphereQuadrature& quad) {
  check_quadrature(spec, quad);
  const std::size_t k = spec.size();
  std::vector<double> gram(k * k, 0.0);
  std::vector<double> gamma(k);
  for (std::size_t i = 0; i < quad.n_theta(); ++i) {
    const double w = quad.polar_weight[i] * quad.azimuth_weight;
    for (std::size_t j = 0; j < quad.n_phi(); ++j) {
      eval_basis(quad.theta[i], quad.phi[j], spec, gamma);
      for (std::size_t a = 0; a < k; ++a) {
        const double wa = w * gamma[a];
        for (std::size_t b = a; b < k; ++b) gram[a * k + b] += wa * gamma[b];
      }
    }
  }
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < a; ++b) gram[a * k + b] = gram[b * k + a];
  return gram;
}

}  // namespace eraloc::harmonics
