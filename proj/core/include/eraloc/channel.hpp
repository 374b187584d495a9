// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "eraloc/array.hpp"
#include "eraloc/harmonics.hpp"
#include "eraloc/rng.hpp"

namespace eraloc::channel {

using cdouble = std::complex<double>;
using array::Direction;
using array::Vec3;

inline constexpr double kSpeedOfLight = 299792458.0;

/// Dense complex matrix, row-major.
class CMatrix {
 public:
  CMatrix() = default;
  CMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  cdouble& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const cdouble& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const cdouble> data() const noexcept { return data_; }
  std::span<cdouble> data() noexcept { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cdouble> data_;
};

struct OfdmGrid {
  std::size_t subcarriers = 0;     // M
  double subcarrier_spacing = 0;   // Hz
  double carrier_frequency = 0;    // Hz

  double wavelength() const noexcept { return kSpeedOfLight / carrier_frequency; }
  /// Throws ConfigError on non-positive fields.
  void validate() const;
};

struct PathParams {
  cdouble alpha;
  double tau = 0.0;  // seconds
  Direction dir;
};

struct MultipathScene {
  std::array<double, 2> ue_position{};  // on z = 0
  Vec3 ap_position{};
  std::vector<Vec3> scatterers;
  std::vector<PathParams> paths;  // sorted by delay; paths[0] is line of sight
};

/// Knobs of the geometric scene generator.
struct SceneModel {
  double reference_distance = 30.0;  // d_ref
  double nlos_attenuation = 0.3;     // rho
  double scatter_half_width = 40.0;  // scatterers in [-w, w]^2 x [0, h]
  double scatter_height = 10.0;
};

/// LoS path plus `num_paths - 1` single-bounce scatterer paths.
/// Throws GenerationError when the UE coincides with the AP.
MultipathScene scene_from_position(const std::array<double, 2>& ue, const Vec3& ap, int num_paths, Rng& rng,
                                   const SceneModel& model = {});

/// Builds a scene from stored path parameters (dataset replay).
MultipathScene scene_from_paths(const std::array<double, 2>& ue, const Vec3& ap, std::vector<PathParams> paths);

/// N x M frequency-domain channel: column m is
/// sum_p alpha_p D(dir_p) a(u_p) exp(-j 2 pi tau_p m delta_f), m zero-based.
CMatrix channel_matrix(const MultipathScene& scene, std::span<const harmonics::PatternCoefficients> coeffs,
                       const OfdmGrid& grid, const array::ArrayGeometry& geom);

struct NoiseModel {
  double sigma2 = 0.0;
  double snr_db = 0.0;
  double p_max = 1.0;

  /// sigma^2 = p_max * 10^(-snr_db / 10).
  static NoiseModel from_snr(double snr_db, double p_max);
  static NoiseModel noiseless(double p_max);
  double sigma() const noexcept;
};

/// Standard complex normal draws (E|xi|^2 = 1, real and imaginary parts
/// independent with variance 1/2), in row order.
std::vector<cdouble> standard_complex_noise(std::size_t count, Rng& rng);

/// y_m = w^H H[:, m] pilot_m + n_m. Throws ConstraintError if ||w||^2 exceeds
/// p_max by more than 1e-9.
std::vector<cdouble> observe(std::span<const cdouble> w, const CMatrix& h, std::span<const cdouble> pilot,
                             const NoiseModel& noise, Rng& rng);

/// Same as `observe` with the unit noise realization supplied by the caller.
std::vector<cdouble> observe_with_noise(std::span<const cdouble> w, const CMatrix& h, std::span<const cdouble> pilot,
                                        const NoiseModel& noise, std::span<const cdouble> unit_noise);

/// One stage's sensing configuration: combiner plus L x N pattern sets.
struct SensingConfig {
  std::vector<cdouble> w;
  std::vector<std::vector<harmonics::PatternCoefficients>> coeffs;  // [substage][antenna]
  int stage_index = 1;

  std::size_t substages() const noexcept { return coeffs.size(); }
  /// Throws ConstraintError / ShapeError if the configuration is not
  /// deployable on an N-element array with power budget p_max.
  void validate(std::size_t num_antennas, double p_max) const;
};

/// M x L observation matrix, column l = substage-l observation.
using ObservationMatrix = CMatrix;

/// Unit-modulus all-ones pilots.
std::vector<std::vector<cdouble>> unit_pilots(std::size_t substages, std::size_t subcarriers);

ObservationMatrix collect_stage(const MultipathScene& scene, const SensingConfig& config, const OfdmGrid& grid,
                                const array::ArrayGeometry& geom, std::span<const std::vector<cdouble>> pilots,
                                const NoiseModel& noise, Rng& rng);

}  // namespace eraloc::channel
