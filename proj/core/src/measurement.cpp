// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#include "eraloc/measurement.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "eraloc/errors.hpp"

namespace eraloc::channel {

using ad::Tape;
using ad::Tensor;
using ad::Var;

SceneResponse SceneResponse::build(const MultipathScene& scene, const OfdmGrid& grid, const array::ArrayGeometry& geom,
                                   const harmonics::BasisSpec& basis, std::span<const cdouble> pilot) {
  if (pilot.size() != grid.subcarriers) throw ShapeError("pilot length differs from subcarrier count");
  SceneResponse r;
  r.paths = scene.paths.size();
  r.antennas = geom.size();
  r.subcarriers = grid.subcarriers;
  r.basis_size = basis.size();
  r.basis.resize(r.paths * r.basis_size);
  r.response.resize(r.paths * r.antennas * r.subcarriers);
  for (std::size_t p = 0; p < r.paths; ++p) {
    const auto& path = scene.paths[p];
    harmonics::eval_basis(path.dir.theta(), path.dir.phi(), basis,
                          std::span<double>(r.basis.data() + p * r.basis_size, r.basis_size));
    const auto a = array::steering_vector(geom, path.dir);
    for (std::size_t n = 0; n < r.antennas; ++n) {
      for (std::size_t m = 0; m < r.subcarriers; ++m) {
        const double phase = -2.0 * std::numbers::pi * path.tau * static_cast<double>(m) * grid.subcarrier_spacing;
        r.response[(p * r.antennas + n) * r.subcarriers + m] = path.alpha * a[n] * std::polar(1.0, phase) * pilot[m];
      }
    }
  }
  return r;
}

Var observe_tokens(Var w, Var coeffs, std::span<const SceneResponse* const> scenes, std::size_t substages) {
  if (!w.valid() || !coeffs.valid() || w.tape != coeffs.tape) throw StateError("observe_tokens: bad tape binding");
  Tape& tape = *w.tape;
  const Tensor& wv = w.value();
  const Tensor& cv = coeffs.value();
  const std::size_t batch = scenes.size();
  if (batch == 0) throw ShapeError("observe_tokens: empty batch");
  const std::size_t n_ant = scenes[0]->antennas, m_sc = scenes[0]->subcarriers, k_sz = scenes[0]->basis_size;
  const std::size_t L = substages;
  for (const SceneResponse* s : scenes) {
    if (s->antennas != n_ant || s->subcarriers != m_sc || s->basis_size != k_sz) {
      throw ShapeError("observe_tokens: scenes in a batch disagree on dimensions");
    }
  }
  if (wv.rows() != batch || wv.cols() != 2 * n_ant) {
    throw ShapeError("observe_tokens: combiner tensor " + ad::shape_string(wv.shape()) + " for batch " +
                     std::to_string(batch) + " and " + std::to_string(n_ant) + " antennas");
  }
  if (cv.rows() != batch || cv.cols() != L * n_ant * k_sz) {
    throw ShapeError("observe_tokens: coefficient tensor " + ad::shape_string(cv.shape()) + " does not match L*N*K");
  }

  Tensor out({batch * L, 2 * m_sc});
  std::vector<cdouble> h(n_ant * m_sc);
  for (std::size_t b = 0; b < batch; ++b) {
    const SceneResponse& s = *scenes[b];
    const double* wb = wv.data() + b * 2 * n_ant;
    for (std::size_t l = 0; l < L; ++l) {
      const double* cl = cv.data() + b * cv.cols() + l * n_ant * k_sz;
      std::fill(h.begin(), h.end(), cdouble{});
      for (std::size_t p = 0; p < s.paths; ++p) {
        const double* gam = s.basis.data() + p * k_sz;
        for (std::size_t n = 0; n < n_ant; ++n) {
          double gain = 0.0;
          for (std::size_t k = 0; k < k_sz; ++k) gain += cl[n * k_sz + k] * gam[k];
          const cdouble* resp = s.response.data() + (p * n_ant + n) * m_sc;
          cdouble* hn = h.data() + n * m_sc;
          for (std::size_t m = 0; m < m_sc; ++m) hn[m] += gain * resp[m];
        }
      }
      double* row = out.data() + (b * L + l) * 2 * m_sc;
      for (std::size_t n = 0; n < n_ant; ++n) {
        const cdouble wc(wb[2 * n], -wb[2 * n + 1]);
        const cdouble* hn = h.data() + n * m_sc;
        for (std::size_t m = 0; m < m_sc; ++m) {
          const cdouble y = wc * hn[m];
          row[m] += y.real();
          row[m_sc + m] += y.imag();
        }
      }
    }
  }

  std::vector<const SceneResponse*> held(scenes.begin(), scenes.end());
  const std::size_t wi = w.id, ci = coeffs.id;
  return tape.push(
      std::move(out), {w, coeffs},
      [wi, ci, held = std::move(held), L, n_ant, m_sc, k_sz](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& wv = tp.value(wi);
        const Tensor& cv = tp.value(ci);
        Tensor* gw = tp.needs_grad(wi) ? &tp.grad(wi) : nullptr;
        Tensor* gc = tp.needs_grad(ci) ? &tp.grad(ci) : nullptr;
        std::vector<cdouble> gy(m_sc);
        std::vector<cdouble> h(n_ant * m_sc);
        for (std::size_t b = 0; b < held.size(); ++b) {
          const SceneResponse& s = *held[b];
          const double* wb = wv.data() + b * 2 * n_ant;
          for (std::size_t l = 0; l < L; ++l) {
            const double* grow = g.data() + (b * L + l) * 2 * m_sc;
            for (std::size_t m = 0; m < m_sc; ++m) gy[m] = cdouble(grow[m], grow[m_sc + m]);
            const double* cl = cv.data() + b * cv.cols() + l * n_ant * k_sz;
            if (gw) {
              // dL/dRe w_n + j dL/dIm w_n = sum_m conj(g_m) H[n, m]
              std::fill(h.begin(), h.end(), cdouble{});
              for (std::size_t p = 0; p < s.paths; ++p) {
                const double* gam = s.basis.data() + p * k_sz;
                for (std::size_t n = 0; n < n_ant; ++n) {
                  double gain = 0.0;
                  for (std::size_t k = 0; k < k_sz; ++k) gain += cl[n * k_sz + k] * gam[k];
                  const cdouble* resp = s.response.data() + (p * n_ant + n) * m_sc;
                  cdouble* hn = h.data() + n * m_sc;
                  for (std::size_t m = 0; m < m_sc; ++m) hn[m] += gain * resp[m];
                }
              }
              double* gwb = gw->data() + b * 2 * n_ant;
              for (std::size_t n = 0; n < n_ant; ++n) {
                cdouble t = 0.0;
                const cdouble* hn = h.data() + n * m_sc;
                for (std::size_t m = 0; m < m_sc; ++m) t += std::conj(gy[m]) * hn[m];
                gwb[2 * n] += t.real();
                gwb[2 * n + 1] += t.imag();
              }
            }
            if (gc) {
              // dL/dc_{n,k} = sum_p gamma_{p,k} Re(conj(w_n) sum_m conj(g_m) R[p, n, m])
              double* gcl = gc->data() + b * cv.cols() + l * n_ant * k_sz;
              for (std::size_t p = 0; p < s.paths; ++p) {
                const double* gam = s.basis.data() + p * k_sz;
                for (std::size_t n = 0; n < n_ant; ++n) {
                  const cdouble* resp = s.response.data() + (p * n_ant + n) * m_sc;
                  cdouble acc = 0.0;
                  for (std::size_t m = 0; m < m_sc; ++m) acc += std::conj(gy[m]) * resp[m];
                  const double coef = (cdouble(wb[2 * n], -wb[2 * n + 1]) * acc).real();
                  for (std::size_t k = 0; k < k_sz; ++k) gcl[n * k_sz + k] += coef * gam[k];
                }
              }
            }
          }
        }
      },
      "observe_tokens");
}

}  // namespace eraloc::channel
