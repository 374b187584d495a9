// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#pragma once

#include <complex>
#include <span>
#include <vector>

#include "eraloc/ad/tape.hpp"
#include "eraloc/channel.hpp"

namespace eraloc::channel {

/// Scene constants of the observation model, independent of the sensing
/// configuration:
///   basis[p, k]       = gamma_k(dir_p)
///   response[p, n, m] = alpha_p [a(u_p)]_n exp(-j 2 pi tau_p m df) pilot_m
/// so that y_{l,m} = sum_n conj(w_n) sum_p (c_{l,n} . basis[p]) response[p, n, m].
struct SceneResponse {
  std::size_t paths = 0;
  std::size_t antennas = 0;
  std::size_t subcarriers = 0;
  std::size_t basis_size = 0;
  std::vector<double> basis;
  std::vector<std::complex<double>> response;

  static SceneResponse build(const MultipathScene& scene, const OfdmGrid& grid, const array::ArrayGeometry& geom,
                             const harmonics::BasisSpec& basis, std::span<const std::complex<double>> pilot);
};

/// Differentiable noiseless observation of one stage for a batch of scenes.
///
/// `w` is [B x 2N] (interleaved real/imaginary combiner), `coeffs` is
/// [B x (L*N*K)] ordered substage, antenna, harmonic. The result is
/// [(B*L) x 2M]; row b*L + l holds [Re y_{b,l}; Im y_{b,l}], one token per
/// substage. Gradients flow to `w` and `coeffs`; scenes are constants.
ad::Var observe_tokens(ad::Var w, ad::Var coeffs, std::span<const SceneResponse* const> scenes,
                       std::size_t substages);

}  // namespace eraloc::channel
