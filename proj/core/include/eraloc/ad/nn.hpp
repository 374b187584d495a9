// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "eraloc/ad/ops.hpp"
#include "eraloc/rng.hpp"

namespace eraloc::ad {

/// Owns parameters at stable addresses; modules hold raw pointers into it.
class ParameterStore {
 public:
  /// Throws ConfigError if `name` already exists.
  Parameter& create(const std::string& name, Shape shape);

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  Parameter* find(const std::string& name);
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const noexcept;
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

/// Fills with U(-sqrt(1/fan_in), sqrt(1/fan_in)).
void init_uniform_fan_in(Parameter& p, std::size_t fan_in, Rng& rng);

/// y = x W + b.
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out);
  void init(Rng& rng);
  Var operator()(Var x) const;
  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  Parameter& weight() const { return *weight_; }
  Parameter& bias() const { return *bias_; }

 private:
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
  std::size_t in_ = 0, out_ = 0;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, std::size_t width);
  void init();
  Var operator()(Var x) const;

 private:
  Parameter* gain_ = nullptr;
  Parameter* bias_ = nullptr;
};

/// Multi-head scaled dot-product self-attention over sequences of
/// `seq_len` consecutive rows.
class MultiHeadSelfAttention {
 public:
  MultiHeadSelfAttention() = default;
  /// Throws ConfigError unless `heads` divides `d_model`.
  MultiHeadSelfAttention(ParameterStore& store, const std::string& name, std::size_t d_model, std::size_t heads);
  void init(Rng& rng);
  /// Output projection of the attended values, no residual.
  Var attend(Var tokens, std::size_t seq_len) const;
  /// tokens + attend(tokens).
  Var operator()(Var tokens, std::size_t seq_len) const;
  std::size_t heads() const { return heads_; }

 private:
  Linear q_, k_, v_, o_;
  std::size_t heads_ = 1;
};

/// Standard LSTM cell, gate column order (input, forget, cell, output).
class LstmCell {
 public:
  struct State {
    Var h;
    Var c;
  };

  LstmCell() = default;
  LstmCell(ParameterStore& store, const std::string& name, std::size_t input, std::size_t hidden);
  /// Uniform fan-in weights, zero biases except forget gate = +1.
  void init(Rng& rng);
  State step(Var z, const State& prev) const;
  std::size_t hidden() const { return hidden_; }
  Parameter& bias() const { return *bias_; }

 private:
  Parameter* wx_ = nullptr;
  Parameter* wh_ = nullptr;
  Parameter* bias_ = nullptr;
  std::size_t input_ = 0, hidden_ = 0;
};

/// Two tanh hidden layers followed by a linear output layer.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out);
  void init(Rng& rng);
  Var operator()(Var x) const;
  std::size_t out_features() const { return out_.out_features(); }

 private:
  Linear l1_, l2_, out_;
};

}  // namespace eraloc::ad
