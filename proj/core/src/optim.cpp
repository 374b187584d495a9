// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#include "eraloc/ad/optim.hpp"

#include <algorithm>
#include <cmath>

#include "eraloc/errors.hpp"

namespace eraloc::ad {

Adam::Adam(std::vector<Parameter*> params, AdamOptions options) : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step() {
  const bool any_backward =
      std::any_of(params_.begin(), params_.end(), [](const Parameter* p) { return p->backward_passes > 0; });
  if (!any_backward) throw StateError("Adam::step called before any backward pass");
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(options_.beta1, t);
  const double c2 = 1.0 - std::pow(options_.beta2, t);
  const double b1 = options_.beta1, b2 = options_.beta2;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = b1 * m[k] + (1.0 - b1) * g;
      v[k] = b2 * v[k] + (1.0 - b2) * g * g;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p.value[k] -= options_.learning_rate * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

void Adam::restore(std::vector<Tensor> m, std::vector<Tensor> v, std::uint64_t steps) {
  if (m.size() != params_.size() || v.size() != params_.size()) throw ShapeError("optimizer state size mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (m[i].shape() != params_[i]->value.shape() || v[i].shape() != params_[i]->value.shape()) {
      throw ShapeError("optimizer state shape mismatch for " + params_[i]->name);
    }
  }
  m_ = std::move(m);
  v_ = std::move(v);
  steps_ = steps;
}

double grad_norm(std::span<Parameter* const> params) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squared_norm();
  return std::sqrt(sq);
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Parameter* p : params)
      for (auto& g : p->grad.values()) g *= s;
  }
  return norm;
}

}  // namespace eraloc::ad
