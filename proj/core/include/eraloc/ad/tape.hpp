// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <unordered_map>
#include <vector>

#include "eraloc/ad/tensor.hpp"

namespace eraloc::ad {

class Tape;

/// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  bool valid() const noexcept { return tape != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Gradient tape for reverse-mode differentiation.
///
/// Operations append nodes in forward order; `backward` visits them in
/// reverse and accumulates gradients additively. A tape created with
/// `record = false` keeps values only, for evaluation.
class Tape {
 public:
  /// Called during backward with the tape and the id of the node whose
  /// output gradient is ready.
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return record_; }

  Var constant(Tensor value);
  /// Leaf bound to `p`; reusing the same parameter returns the same node.
  Var param(Parameter& p);

  /// Appends an op result. `fn` runs only if some input requires a gradient.
  /// Throws NumericError if `value` contains NaN or Inf.
  Var push(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn, const char* op_name);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool needs_grad(std::size_t id) const noexcept { return nodes_[id].needs_grad; }
  bool needs_grad(Var v) const noexcept { return nodes_[v.id].needs_grad; }

  /// Gradient buffer of a node, zero-allocated on first access.
  Tensor& grad(std::size_t id);
  Tensor& grad(Var v) { return grad(v.id); }
  bool has_grad(std::size_t id) const noexcept { return !nodes_[id].grad.empty(); }

  /// Seeds d(loss)/d(loss) = 1, runs every recorded backward in reverse
  /// order, and adds leaf gradients into their Parameters.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

inline const Tensor& Var::value() const { return tape->value(id); }

}  // namespace eraloc::ad
