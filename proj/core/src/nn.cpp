// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#include "eraloc/ad/nn.hpp"

#include <cmath>

#include "eraloc/errors.hpp"

namespace eraloc::ad {

Parameter& ParameterStore::create(const std::string& name, Shape shape) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name '" + name + "'");
  params_.push_back(std::make_unique<Parameter>(name, Tensor(std::move(shape))));
  return *params_.back();
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

Parameter* ParameterStore::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

std::size_t ParameterStore::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

void init_uniform_fan_in(Parameter& p, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : p.value.values()) v = dist(rng);
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out)
    : weight_(&store.create(name + ".weight", {in, out})),
      bias_(&store.create(name + ".bias", {out})),
      in_(in),
      out_(out) {}

void Linear::init(Rng& rng) {
  init_uniform_fan_in(*weight_, in_, rng);
  bias_->value.fill(0.0);
}

Var Linear::operator()(Var x) const {
  Tape& t = *x.tape;
  return linear(x, t.param(*weight_), t.param(*bias_));
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, std::size_t width)
    : gain_(&store.create(name + ".gain", {width})), bias_(&store.create(name + ".bias", {width})) {}

void LayerNorm::init() {
  gain_->value.fill(1.0);
  bias_->value.fill(0.0);
}

Var LayerNorm::operator()(Var x) const {
  Tape& t = *x.tape;
  return layer_norm(x, t.param(*gain_), t.param(*bias_));
}

MultiHeadSelfAttention::MultiHeadSelfAttention(ParameterStore& store, const std::string& name, std::size_t d_model,
                                               std::size_t heads)
    : heads_(heads) {
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  q_ = Linear(store, name + ".q", d_model, d_model);
  k_ = Linear(store, name + ".k", d_model, d_model);
  v_ = Linear(store, name + ".v", d_model, d_model);
  o_ = Linear(store, name + ".o", d_model, d_model);
}

void MultiHeadSelfAttention::init(Rng& rng) {
  q_.init(rng);
  k_.init(rng);
  v_.init(rng);
  o_.init(rng);
}

Var MultiHeadSelfAttention::attend(Var tokens, std::size_t seq_len) const {
  const Var ctx = attention(q_(tokens), k_(tokens), v_(tokens), seq_len, heads_);
  return o_(ctx);
}

Var MultiHeadSelfAttention::operator()(Var tokens, std::size_t seq_len) const {
  return add(tokens, attend(tokens, seq_len));
}

LstmCell::LstmCell(ParameterStore& store, const std::string& name, std::size_t input, std::size_t hidden)
    : wx_(&store.create(name + ".wx", {input, 4 * hidden})),
      wh_(&store.create(name + ".wh", {hidden, 4 * hidden})),
      bias_(&store.create(name + ".bias", {4 * hidden})),
      input_(input),
      hidden_(hidden) {}

void LstmCell::init(Rng& rng) {
  init_uniform_fan_in(*wx_, input_ + hidden_, rng);
  init_uniform_fan_in(*wh_, input_ + hidden_, rng);
  bias_->value.fill(0.0);
  for (std::size_t j = hidden_; j < 2 * hidden_; ++j) bias_->value[j] = 1.0;
}

LstmCell::State LstmCell::step(Var z, const State& prev) const {
  if (z.value().cols() != input_) throw ShapeError("lstm: input width mismatch");
  if (prev.h.value().cols() != hidden_ || prev.c.value().cols() != hidden_) {
    throw ShapeError("lstm: state width mismatch");
  }
  Tape& t = *z.tape;
  const Var gates = add_row_broadcast(add(matmul(z, t.param(*wx_)), matmul(prev.h, t.param(*wh_))), t.param(*bias_));
  const std::size_t n = hidden_;
  const Var i = sigmoid(slice_cols(gates, 0, n));
  const Var f = sigmoid(slice_cols(gates, n, n));
  const Var g = tanh(slice_cols(gates, 2 * n, n));
  const Var o = sigmoid(slice_cols(gates, 3 * n, n));
  const Var c = add(mul(f, prev.c), mul(i, g));
  const Var h = mul(o, tanh(c));
  return {h, c};
}

Mlp::Mlp(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out)
    : l1_(store, name + ".l1", in, hidden), l2_(store, name + ".l2", hidden, hidden), out_(store, name + ".out", hidden, out) {}

void Mlp::init(Rng& rng) {
  l1_.init(rng);
  l2_.init(rng);
  out_.init(rng);
}

Var Mlp::operator()(Var x) const { return out_(tanh(l2_(tanh(l1_(x))))); }

}  // namespace eraloc::ad
